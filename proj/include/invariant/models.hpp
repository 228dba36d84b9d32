#pragma once

#include <cstdint>
#include <vector>

#include "invariant/lie.hpp"
#include "invariant/rng.hpp"

namespace invariant::models {

using lie::ExtendedPose;
using lie::Mat3;
using lie::Mat5;
using lie::Vec3;

struct ImuSample {
    double t = 0.0;   // s
    Vec3 gyro = Vec3::Zero();   // rad/s, body frame
    Vec3 accel = Vec3::Zero();  // m/s^2, specific force in body frame
};

struct PositionFix {
    double t = 0.0;
    int receiver_id = 1;  // 1 or 2
    Vec3 y = Vec3::Zero();
};

struct ReceiverGeometry {
    Vec3 lever1 = {0.9, 0.0, 0.0};   // IMU -> receiver 1, body frame (m)
    Vec3 lever2 = {-0.9, 0.0, 0.0};  // IMU -> receiver 2, body frame (m)

    // Receiver 1 -> receiver 2, body frame.
    Vec3 baseline() const { return lever2 - lever1; }
};

// Defaults: per-step discrete IMU noise of 0.0012 rad / 0.0025 m/s^2 at
// 250 Hz expressed as PSDs, and the reference receiver covariances.
struct NoiseModel {
    Mat3 gyro_psd = 3.6e-4 * Mat3::Identity();     // rad^2/s
    Mat3 accel_psd = 1.5625e-3 * Mat3::Identity(); // (m/s^2)^2/Hz
    Mat3 r1 = Vec3(0.0169, 0.0121, 0.0361).asDiagonal();  // m^2
    Mat3 r2 = Vec3(0.0169, 0.0121, 0.0361).asDiagonal();  // m^2

    // Throws ConfigError unless every block is symmetric positive definite.
    void validate() const;
};

struct GravityModel {
    Vec3 g = {0.0, 0.0, -9.81};  // m/s^2, inertial frame, z up
};

// Analytic test trajectory: sinusoidal position and ZYX Euler angle profiles,
// nonzero on every axis so all sensors are excited from t = 0. The default
// frequencies are integer cycle counts over the 50 s duration.
struct TrajectoryConfig {
    double duration = 50.0;  // s
    double imu_rate = 250.0; // Hz
    double fix_rate = 15.0;  // Hz
    Vec3 position_amplitude = {1.5, 1.2, 0.9};    // m
    Vec3 position_frequency = {0.20, 0.26, 0.32}; // Hz
    Vec3 euler_amplitude = {0.5, 0.4, 0.6};       // rad
    Vec3 euler_frequency = {0.24, 0.14, 0.18};    // Hz
    Vec3 initial_position = Vec3::Zero();  // m
    Vec3 initial_euler = Vec3::Zero();     // rad, (roll, pitch, yaw) offset
    std::uint64_t seed = 1;

    void validate() const;  // throws ConfigError on nonpositive rates/duration
};

struct TruthSample {
    double t = 0.0;
    ExtendedPose pose;
    Vec3 omega_b = Vec3::Zero();  // body angular velocity (rad/s)
    Vec3 accel_a = Vec3::Zero();  // inertial acceleration dv/dt (m/s^2)
};

// Closed-form evaluation of the configured trajectory at arbitrary t.
class TrajectoryEvaluator {
public:
    TrajectoryEvaluator(const TrajectoryConfig& cfg, const GravityModel& gravity);
    TruthSample at(double t) const;
    ImuSample imu_at(double t) const;  // noiseless point sample of the truth
    // Noiseless sample standing for the average rate over [t_start, t_start+dt).
    ImuSample imu_for_step(double t_start, double dt) const;

private:
    TrajectoryConfig cfg_;
    GravityModel gravity_;
    Mat3 c0_;  // initial attitude from cfg.initial_euler
};

struct SimulatedTruth {
    std::vector<TruthSample> truth;  // at k/imu_rate, k = 0..N (inclusive)
    std::vector<ImuSample> imu;      // imu[k] taken at t_k, drives step k -> k+1
    double dt = 0.0;
};

// Ground-truth pose sequence plus the noiseless IMU stream on the IMU grid.
SimulatedTruth simulate_trajectory(const TrajectoryConfig& cfg, const GravityModel& gravity);

// Block matrix F(X, u) of the SE2(3) process model, laid out exactly as the
// continuous-time kinematics embed (bottom-right 2x2 identity).
Mat5 process_rate(const ExtendedPose& x, const ImuSample& u, const GravityModel& gravity);

// || F(X1 X2) - X1 F(X2) - F(X1) X2 + X1 F(1) X2 ||_F
double group_affine_residual(const ExtendedPose& x1, const ExtendedPose& x2,
                             const ImuSample& u, const GravityModel& gravity);

// Noiseless gyro/accelerometer readings implied by the true motion.
ImuSample imu_from_truth(const Mat3& c_ab, const Vec3& omega_b, const Vec3& accel_a,
                         const GravityModel& gravity, double t = 0.0);

// Exact constant-input integration of the kinematics over dt:
// C+ = C exp(u1 dt), v+ = v + (C u2 + g) dt, r+ = r + v dt + (C u2 + g) dt^2/2.
ExtendedPose propagate_mean(const ExtendedPose& x, const ImuSample& u,
                            const GravityModel& gravity, double dt);

struct ReceiverFixes {
    Vec3 y1 = Vec3::Zero();
    Vec3 y2 = Vec3::Zero();
    Vec3 rel = Vec3::Zero();  // y2 - y1
};

// Noiseless receiver outputs for a true pose.
ReceiverFixes synthesize_fixes(const ExtendedPose& truth, const ReceiverGeometry& geom);

// Noisy receiver outputs; n1, n2 drawn independently from R1, R2 and the
// relative measurement formed as y2 - y1 so its cross-correlation is real.
ReceiverFixes synthesize_fixes(const ExtendedPose& truth, const ReceiverGeometry& geom,
                               const NoiseModel& noise, Rng& rng);

// Rz(yaw) * Ry(pitch) * Rx(roll), body-to-inertial.
Mat3 euler_zyx_to_dcm(const Vec3& rpy);

// Body angular velocity from ZYX Euler angles and their rates.
Vec3 euler_rates_to_body(const Vec3& rpy, const Vec3& rpy_rates);

}  // namespace invariant::models
