#include "invariant/models.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>

#include "invariant/errors.hpp"

namespace invariant::models {

namespace {

constexpr double kTwoPi = 6.28318530717958647692;

void require_spd(const Mat3& m, const char* name) {
    if ((m - m.transpose()).norm() > 1e-12) {
        throw ConfigError(std::string(name) + " must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Mat3> es(m);
    if (es.eigenvalues().minCoeff() <= 0.0) {
        throw ConfigError(std::string(name) + " must be positive definite");
    }
}

}  // namespace

void NoiseModel::validate() const {
    require_spd(gyro_psd, "gyro_psd");
    require_spd(accel_psd, "accel_psd");
    require_spd(r1, "r1");
    require_spd(r2, "r2");
}

void TrajectoryConfig::validate() const {
    if (duration <= 0.0) throw ConfigError("duration must be positive");
    if (imu_rate <= 0.0) throw ConfigError("imu_rate must be positive");
    if (fix_rate <= 0.0) throw ConfigError("fix_rate must be positive");
}

Mat3 euler_zyx_to_dcm(const Vec3& rpy) {
    const double cr = std::cos(rpy.x()), sr = std::sin(rpy.x());
    const double cp = std::cos(rpy.y()), sp = std::sin(rpy.y());
    const double cy = std::cos(rpy.z()), sy = std::sin(rpy.z());
    Mat3 rx, ry, rz;
    // clang-format off
    rx << 1, 0, 0,
          0, cr, -sr,
          0, sr, cr;
    ry << cp, 0, sp,
          0, 1, 0,
          -sp, 0, cp;
    rz << cy, -sy, 0,
          sy, cy, 0,
          0, 0, 1;
    // clang-format on
    return rz * ry * rx;
}

Vec3 euler_rates_to_body(const Vec3& rpy, const Vec3& rpy_rates) {
    const double cr = std::cos(rpy.x()), sr = std::sin(rpy.x());
    const double cp = std::cos(rpy.y()), sp = std::sin(rpy.y());
    const double dr = rpy_rates.x(), dp = rpy_rates.y(), dy = rpy_rates.z();
    return {dr - dy * sp,
            dp * cr + dy * cp * sr,
            -dp * sr + dy * cp * cr};
}

TrajectoryEvaluator::TrajectoryEvaluator(const TrajectoryConfig& cfg, const GravityModel& gravity)
    : cfg_(cfg), gravity_(gravity), c0_(euler_zyx_to_dcm(cfg.initial_euler)) {
    cfg_.validate();
}

namespace {

struct Profile {
    double value, rate, accel;
};

Profile sine_wave(double amp, double freq_hz, double t) {
    const double w = kTwoPi * freq_hz;
    return {amp * std::sin(w * t), amp * w * std::cos(w * t), -amp * w * w * std::sin(w * t)};
}

}  // namespace

TruthSample TrajectoryEvaluator::at(double t) const {
    TruthSample s;
    s.t = t;
    Vec3 rpy, rpy_rates;
    for (int i = 0; i < 3; ++i) {
        const Profile p = sine_wave(cfg_.position_amplitude(i), cfg_.position_frequency(i), t);
        const Profile e = sine_wave(cfg_.euler_amplitude(i), cfg_.euler_frequency(i), t);
        s.pose.position(i) = cfg_.initial_position(i) + p.value;
        s.pose.velocity(i) = p.rate;
        s.accel_a(i) = p.accel;
        rpy(i) = e.value;
        rpy_rates(i) = e.rate;
    }
    s.pose.rotation = c0_ * euler_zyx_to_dcm(rpy);
    s.omega_b = euler_rates_to_body(rpy, rpy_rates);
    return s;
}

ImuSample TrajectoryEvaluator::imu_at(double t) const {
    const TruthSample s = at(t);
    return imu_from_truth(s.pose.rotation, s.omega_b, s.accel_a, gravity_, t);
}

ImuSample TrajectoryEvaluator::imu_for_step(double t_start, double dt) const {
    // Increment-style sample over [t_start, t_start + dt): the equivalent
    // rotation vector and the velocity increment resolved in the body frame
    // at t_start, each divided by dt. This is what a strapdown IMU's
    // delta-theta / delta-v outputs provide (coning/sculling compensated),
    // and it is an average rate consistent with the pointwise model to
    // second order.
    const TruthSample s0 = at(t_start);
    const TruthSample s1 = at(t_start + dt);
    ImuSample u;
    u.t = t_start;
    u.gyro = lie::log_so3(Mat3(s0.pose.rotation.transpose() * s1.pose.rotation)) / dt;
    u.accel =
        s0.pose.rotation.transpose() * ((s1.pose.velocity - s0.pose.velocity) / dt - gravity_.g);
    return u;
}

SimulatedTruth simulate_trajectory(const TrajectoryConfig& cfg, const GravityModel& gravity) {
    cfg.validate();
    const TrajectoryEvaluator eval(cfg, gravity);
    SimulatedTruth out;
    out.dt = 1.0 / cfg.imu_rate;
    const int n_steps = static_cast<int>(std::llround(cfg.duration * cfg.imu_rate));
    out.truth.reserve(n_steps + 1);
    out.imu.reserve(n_steps);
    for (int k = 0; k <= n_steps; ++k) {
        const double t = k * out.dt;
        out.truth.push_back(eval.at(t));
        if (k < n_steps) out.imu.push_back(eval.imu_for_step(t, out.dt));
    }
    return out;
}

Mat5 process_rate(const ExtendedPose& x, const ImuSample& u, const GravityModel& gravity) {
    Mat5 f = Mat5::Zero();
    f.topLeftCorner<3, 3>() = x.rotation * lie::so3_wedge(u.gyro);
    f.block<3, 1>(0, 3) = x.rotation * u.accel + gravity.g;
    f.block<3, 1>(0, 4) = x.velocity;
    f(3, 3) = 1.0;
    f(4, 4) = 1.0;
    return f;
}

double group_affine_residual(const ExtendedPose& x1, const ExtendedPose& x2,
                             const ImuSample& u, const GravityModel& gravity) {
    const Mat5 m1 = x1.as_matrix();
    const Mat5 m2 = x2.as_matrix();
    const Mat5 lhs = process_rate(compose(x1, x2), u, gravity);
    const Mat5 rhs = m1 * process_rate(x2, u, gravity) + process_rate(x1, u, gravity) * m2 -
                     m1 * process_rate(ExtendedPose::identity(), u, gravity) * m2;
    return (lhs - rhs).norm();
}

ImuSample imu_from_truth(const Mat3& c_ab, const Vec3& omega_b, const Vec3& accel_a,
                         const GravityModel& gravity, double t) {
    ImuSample u;
    u.t = t;
    u.gyro = omega_b;
    u.accel = c_ab.transpose() * (accel_a - gravity.g);
    return u;
}

ExtendedPose propagate_mean(const ExtendedPose& x, const ImuSample& u,
                            const GravityModel& gravity, double dt) {
    const Vec3 accel_world = x.rotation * u.accel + gravity.g;
    ExtendedPose out;
    out.rotation = x.rotation * lie::exp_so3(u.gyro * dt);
    out.velocity = x.velocity + accel_world * dt;
    out.position = x.position + x.velocity * dt + 0.5 * accel_world * dt * dt;
    return out;
}

ReceiverFixes synthesize_fixes(const ExtendedPose& truth, const ReceiverGeometry& geom) {
    ReceiverFixes f;
    f.y1 = truth.position + truth.rotation * geom.lever1;
    f.y2 = truth.position + truth.rotation * geom.lever2;
    f.rel = f.y2 - f.y1;
    return f;
}

ReceiverFixes synthesize_fixes(const ExtendedPose& truth, const ReceiverGeometry& geom,
                               const NoiseModel& noise, Rng& rng) {
    ReceiverFixes f = synthesize_fixes(truth, geom);
    f.y1 += rng.gaussian_vec<3>(cholesky_lower<3>(noise.r1));
    f.y2 += rng.gaussian_vec<3>(cholesky_lower<3>(noise.r2));
    f.rel = f.y2 - f.y1;
    return f;
}

}  // namespace invariant::models
