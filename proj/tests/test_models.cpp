#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "invariant/errors.hpp"
#include "invariant/models.hpp"
#include "invariant/rng.hpp"
#include "oracles.hpp"

using namespace invariant;
using namespace invariant::models;
using lie::ExtendedPose;
using lie::Mat3;
using lie::Mat5;
using lie::Vec3;
using oracles::near_mat;
using oracles::RandomSource;

namespace {
constexpr double kPi = 3.14159265358979323846;
const GravityModel kGravity{};
}

TEST_CASE("process_rate plug-in cases") {
    ImuSample u;
    const Mat5 f = process_rate(ExtendedPose::identity(), u, kGravity);
    CHECK(f.topLeftCorner<3, 3>().isZero(0.0));
    CHECK(near_mat(f.block<3, 1>(0, 3), Vec3(0, 0, -9.81), 0.0));
    CHECK(f.block<3, 1>(0, 4).isZero(0.0));

    // Stationary hover: accelerometer cancels gravity.
    ImuSample hover;
    hover.accel = Vec3(0, 0, 9.81);
    const Mat5 fh = process_rate(ExtendedPose::identity(), hover, kGravity);
    CHECK(fh.block<3, 1>(0, 3).isZero(1e-15));

    RandomSource rnd(21);
    for (int i = 0; i < 50; ++i) {
        const ExtendedPose x = rnd.pose();
        const ImuSample ur = rnd.imu();
        const Mat5 fr = process_rate(x, ur, kGravity);
        CHECK(near_mat(fr.topLeftCorner<3, 3>(), Mat3(x.rotation * lie::so3_wedge(ur.gyro)),
                       1e-13));
        CHECK(near_mat(fr.block<3, 1>(0, 3), Vec3(x.rotation * ur.accel + kGravity.g), 1e-13));
        CHECK(near_mat(fr.block<3, 1>(0, 4), x.velocity, 0.0));
    }
}

TEST_CASE("group affine property of the process model") {
    CHECK(group_affine_residual(ExtendedPose::identity(), ExtendedPose::identity(), ImuSample{},
                                kGravity) == 0.0);

    RandomSource rnd(22);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const double r = group_affine_residual(rnd.pose(), rnd.pose(), rnd.imu(), kGravity);
        worst = std::max(worst, r);
    }
    CHECK(worst <= 1e-12);

    // A non-group-affine map must be flagged by the same residual.
    for (int i = 0; i < 20; ++i) {
        const ExtendedPose x1 = rnd.pose();
        const ExtendedPose x2 = rnd.pose();
        const auto f_bad = [](const ExtendedPose& x) { return Mat5(x.as_matrix() * x.as_matrix()); };
        const Mat5 lhs = f_bad(lie::compose(x1, x2));
        const Mat5 rhs = x1.as_matrix() * f_bad(x2) + f_bad(x1) * x2.as_matrix() -
                         x1.as_matrix() * f_bad(ExtendedPose::identity()) * x2.as_matrix();
        CHECK((lhs - rhs).norm() > 0.1);
    }
}

TEST_CASE("imu_from_truth") {
    // Level and stationary: accelerometer reads the gravity reaction.
    const ImuSample still =
        imu_from_truth(Mat3::Identity(), Vec3::Zero(), Vec3::Zero(), kGravity);
    CHECK(near_mat(still.accel, Vec3(0, 0, 9.81), 1e-15));
    CHECK(still.gyro.isZero(0.0));

    // Free fall: zero specific force.
    const ImuSample fall = imu_from_truth(Mat3::Identity(), Vec3::Zero(), kGravity.g, kGravity);
    CHECK(fall.accel.isZero(1e-15));

    // Quarter turn about z, accelerating along world x with no gravity.
    const Mat3 c = lie::exp_so3(Vec3(0, 0, kPi / 2));
    const ImuSample u = imu_from_truth(c, Vec3::Zero(), Vec3(1, 0, 0), GravityModel{Vec3::Zero()});
    CHECK(near_mat(u.accel, Vec3(0, -1, 0), 1e-14));
    CHECK(near_mat(u.accel, Vec3(c.transpose() * Vec3(1, 0, 0)), 1e-14));
}

TEST_CASE("simulate_trajectory static case") {
    TrajectoryConfig cfg;
    cfg.duration = 2.0;
    cfg.position_amplitude.setZero();
    cfg.euler_amplitude.setZero();
    const auto sim = simulate_trajectory(cfg, kGravity);
    for (const auto& s : sim.truth) {
        CHECK(near_mat(s.pose.rotation, Mat3::Identity(), 1e-14));
        CHECK(s.pose.velocity.isZero(1e-14));
        CHECK(near_mat(s.pose.position, cfg.initial_position, 1e-14));
    }
    for (const auto& u : sim.imu) {
        CHECK(u.gyro.isZero(1e-14));
        CHECK(near_mat(u.accel, Vec3(0, 0, 9.81), 1e-13));
    }
}

TEST_CASE("simulate_trajectory rejects bad configs") {
    TrajectoryConfig cfg;
    cfg.duration = 0.0;
    CHECK_THROWS_AS((void)simulate_trajectory(cfg, kGravity), ConfigError);
    cfg.duration = 10.0;
    cfg.imu_rate = -1.0;
    CHECK_THROWS_AS((void)simulate_trajectory(cfg, kGravity), ConfigError);
}

TEST_CASE("simulated velocity matches differentiated position") {
    TrajectoryConfig cfg;  // default dynamic trajectory
    cfg.duration = 5.0;
    const auto sim = simulate_trajectory(cfg, kGravity);
    double vmax = 0.0;
    for (const auto& s : sim.truth) vmax = std::max(vmax, s.pose.velocity.norm());
    const double h = sim.dt;
    for (std::size_t k = 1; k + 1 < sim.truth.size(); ++k) {
        const Vec3 central =
            (sim.truth[k + 1].pose.position - sim.truth[k - 1].pose.position) / (2.0 * h);
        CHECK((central - sim.truth[k].pose.velocity).norm() <= 1e-4 * vmax);
    }
}

TEST_CASE("imu stream integrates back to the final truth pose") {
    TrajectoryConfig cfg;  // 50 s default
    const auto sim = simulate_trajectory(cfg, kGravity);
    ExtendedPose x = sim.truth.front().pose;
    for (const auto& u : sim.imu) {
        x = propagate_mean(x, u, kGravity, sim.dt);
    }
    const ExtendedPose& truth = sim.truth.back().pose;
    CHECK(lie::log_so3(Mat3(truth.rotation.transpose() * x.rotation)).norm() <= 1e-4);
    CHECK((x.position - truth.position).norm() <= 1e-3);
}

TEST_CASE("angular velocity is consistent with the attitude profile") {
    TrajectoryConfig cfg;
    const TrajectoryEvaluator eval(cfg, kGravity);
    const double h = 1e-6;
    for (double t : {0.3, 1.7, 4.9, 12.345}) {
        const auto s = eval.at(t);
        const Mat3 dc = (eval.at(t + h).pose.rotation - eval.at(t - h).pose.rotation) / (2.0 * h);
        // dC = C w^x  =>  w = vee(C^T dC)
        const Vec3 w = lie::so3_vee(Mat3(s.pose.rotation.transpose() * dc));
        CHECK((w - s.omega_b).norm() <= 1e-6 * std::max(1.0, s.omega_b.norm()));
    }
}

TEST_CASE("synthesize_fixes noiseless geometry") {
    ReceiverGeometry geom;
    geom.lever1 = Vec3::Zero();
    geom.lever2 = Vec3(1.8, 0, 0);
    const auto f = synthesize_fixes(ExtendedPose::identity(), geom);
    CHECK(f.y1.isZero(0.0));
    CHECK(near_mat(f.rel, Vec3(1.8, 0, 0), 0.0));

    // The relative fix depends on attitude only: translating the pose moves
    // both receivers together.
    RandomSource rnd(23);
    for (int i = 0; i < 50; ++i) {
        ExtendedPose x = rnd.pose();
        const auto a = synthesize_fixes(x, geom);
        x.position += rnd.vec3(10.0);
        const auto b = synthesize_fixes(x, geom);
        CHECK(near_mat(a.rel, b.rel, 1e-12));
        CHECK(near_mat(a.rel, Vec3(x.rotation * geom.baseline()), 1e-12));
    }

    // Zero lever: the position fix is the position exactly.
    for (int i = 0; i < 20; ++i) {
        const ExtendedPose x = rnd.pose();
        CHECK(near_mat(synthesize_fixes(x, geom).y1, x.position, 0.0));
    }
}

TEST_CASE("noisy fixes have the configured covariance") {
    NoiseModel noise;
    noise.gyro_psd = Mat3::Identity();
    noise.accel_psd = Mat3::Identity();
    noise.r1 = Vec3(0.0169, 0.0121, 0.0361).asDiagonal();
    noise.r2 = Vec3(0.04, 0.03, 0.05).asDiagonal();
    ReceiverGeometry geom;
    Rng rng(991);

    const int n = 100000;
    Eigen::Matrix3d acc = Eigen::Matrix3d::Zero();
    for (int i = 0; i < n; ++i) {
        const auto f = synthesize_fixes(ExtendedPose::identity(), geom, noise, rng);
        const Vec3 n1 = f.y1 - geom.lever1;
        acc += n1 * n1.transpose();
    }
    const Eigen::Matrix3d sample_cov = acc / n;
    for (int i = 0; i < 3; ++i) {
        CHECK(sample_cov(i, i) == doctest::Approx(noise.r1(i, i)).epsilon(0.05));
    }
}

TEST_CASE("noise model validation") {
    NoiseModel noise;
    noise.r1(0, 1) = 0.5;  // asymmetric
    CHECK_THROWS_AS(noise.validate(), ConfigError);
    noise.r1(0, 1) = 0.0;
    noise.r1(0, 0) = -1.0;  // not PD
    CHECK_THROWS_AS(noise.validate(), ConfigError);
}
