// Compares the serial reference Monte Carlo runner against the OpenMP one on
// the same battery and verifies they produce identical results.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "invariant/eval.hpp"

using namespace invariant;

namespace {

double seconds_since(std::chrono::steady_clock::time_point start) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

bool identical(const std::vector<std::vector<eval::TrialResult>>& a,
               const std::vector<std::vector<eval::TrialResult>>& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i].size() != b[i].size()) return false;
        for (std::size_t f = 0; f < a[i].size(); ++f) {
            if (std::memcmp(&a[i][f].rmse_att, &b[i][f].rmse_att, sizeof(double)) != 0 ||
                std::memcmp(&a[i][f].rmse_vel, &b[i][f].rmse_vel, sizeof(double)) != 0 ||
                std::memcmp(&a[i][f].rmse_pos, &b[i][f].rmse_pos, sizeof(double)) != 0 ||
                a[i][f].nis != b[i][f].nis) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

int main(int argc, char** argv) {
    eval::BatchConfig cfg;
    cfg.trials = argc > 1 ? std::atoi(argv[1]) : 16;
    cfg.trajectory.duration = argc > 2 ? std::atof(argv[2]) : 10.0;

    const auto inputs = eval::prepare_inputs(cfg);
    std::printf("battery: %d trials x %.3g s x %zu filters (%zu predict steps each)\n",
                cfg.trials, cfg.trajectory.duration, cfg.filters.size(), inputs.sim.imu.size());

    auto t0 = std::chrono::steady_clock::now();
    const auto serial = eval::run_trials_serial(inputs, cfg);
    const double t_serial = seconds_since(t0);
    std::printf("serial reference: %.3f s\n", t_serial);

    t0 = std::chrono::steady_clock::now();
    const auto parallel = eval::run_trials_parallel(inputs, cfg);
    const double t_parallel = seconds_since(t0);
#ifdef _OPENMP
    std::printf("openmp (%d threads): %.3f s, speedup %.2fx\n", omp_get_max_threads(),
                t_parallel, t_serial / t_parallel);
#else
    std::printf("openmp unavailable, fallback loop: %.3f s\n", t_parallel);
#endif

    if (!identical(serial, parallel)) {
        std::printf("FAIL: serial and parallel runners disagree\n");
        return 1;
    }
    std::printf("serial and parallel results identical\n");
    return 0;
}
