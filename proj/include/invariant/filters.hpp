#pragma once

#include <string>
#include <utility>

#include <Eigen/Core>

#include "invariant/lie.hpp"
#include "invariant/models.hpp"

namespace invariant::filters {

using lie::ExtendedPose;
using lie::Mat3;
using lie::Mat9;
using lie::Vec3;
using lie::Vec9;
using models::ImuSample;
using models::NoiseModel;
using models::ReceiverGeometry;

enum class FilterVariant { Iekf, Mekf };

// The three filters under study.
enum class FilterKind { Iekf2, Iekf1, Mekf2 };

FilterVariant variant_of(FilterKind kind);
int receivers_of(FilterKind kind);
std::string name_of(FilterKind kind);
FilterKind kind_from_name(const std::string& name);  // throws ConfigError

struct FilterState {
    ExtendedPose mean;
    Mat9 cov = Mat9::Zero();  // blocks ordered (theta, vel, pos)
    double t = 0.0;
};

struct LinearizedProcess {
    Mat9 a_c = Mat9::Zero();
    Mat9 l_c = Mat9::Zero();
};

struct LinearizedMeasurement {
    Eigen::MatrixXd h;        // (3 or 6) x 9
    Eigen::MatrixXd m;        // square, same rows as h
    Eigen::MatrixXd r_joint;  // square SPD
};

// IEKF error-state Jacobians. A function of the input only: no state estimate
// appears in the signature, which is the point of the invariant construction.
LinearizedProcess iekf_process_jacobians(const ImuSample& u);

// MEKF Jacobians; state dependent through the attitude estimate.
// Error convention: C = C_est * exp(theta^x), dv = v - v_est, dr = r - r_est.
LinearizedProcess mekf_process_jacobians(const ImuSample& u, const Mat3& c_est);

// Van Loan discretization of (A_c, L_c) with the PSD blocks (Q_omega, Q_accel)
// embedded on the 9-dimensional noise space. Returns (A_d, Q_d).
std::pair<Mat9, Mat9> discretize(const LinearizedProcess& lin, const NoiseModel& noise, double dt);

// Propagates the mean by the exact constant-input step and the covariance by
// the variant's discretized Jacobians.
FilterState predict(const FilterState& state, const ImuSample& u, const NoiseModel& noise,
                    const models::GravityModel& gravity, double dt, FilterVariant variant);

// H, M and the joint measurement covariance for one or two receivers. The
// two-receiver R is [[R1, -R1], [-R1, R1+R2]] from n_rel = n2 - n1.
LinearizedMeasurement iekf_meas_jacobians(const ReceiverGeometry& geom, const NoiseModel& noise,
                                          const ExtendedPose& x_pred, int receivers);

LinearizedMeasurement mekf_meas_jacobians(const ReceiverGeometry& geom, const NoiseModel& noise,
                                          const Mat3& c_pred, int receivers = 2);

// Left-invariant innovation: rows of X_pred^-1 (y_i - y_i_pred) for the lifted
// position and relative measurements. Size 6 (two receivers) or 3 (one).
Eigen::VectorXd iekf_innovation(const ExtendedPose& x_pred, const Vec3& y1, const Vec3& rel,
                                const ReceiverGeometry& geom, int receivers = 2);

// Measurement-minus-prediction innovation of the MEKF baseline.
Eigen::VectorXd mekf_innovation(const ExtendedPose& x_pred, const Vec3& y1, const Vec3& rel,
                                const ReceiverGeometry& geom, int receivers = 2);

struct CorrectResult {
    FilterState state;
    double nis = 0.0;  // z^T S^-1 z
};

// Kalman correction with Joseph-form covariance update. Throws NumericError
// when S is singular (condition number above 1e12).
CorrectResult correct(const FilterState& state, const LinearizedMeasurement& lin,
                      const Eigen::VectorXd& z, FilterVariant variant);

}  // namespace invariant::filters
