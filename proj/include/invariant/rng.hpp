#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Core>

namespace invariant {

// splitmix64 finalizer; good enough to decorrelate sequential seeds.
inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Deterministic per-stream seed derivation. All randomness in a run flows
// from one master seed through this function; there is no global RNG.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
    return splitmix64(splitmix64(master) ^ splitmix64(stream * 0x9e3779b97f4a7c15ULL + 1));
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double gaussian() { return normal_(engine_); }

    // Draws x ~ N(0, L L^T) given the lower Cholesky factor L.
    template <int N>
    Eigen::Matrix<double, N, 1> gaussian_vec(const Eigen::Matrix<double, N, N>& chol_lower) {
        Eigen::Matrix<double, N, 1> z;
        for (int i = 0; i < N; ++i) z(i) = gaussian();
        return chol_lower * z;
    }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
};

template <int N>
Eigen::Matrix<double, N, N> cholesky_lower(const Eigen::Matrix<double, N, N>& cov) {
    return Eigen::LLT<Eigen::Matrix<double, N, N>>(cov).matrixL();
}

}  // namespace invariant
