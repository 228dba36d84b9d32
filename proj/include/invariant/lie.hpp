#pragma once

#include <Eigen/Core>

namespace invariant::lie {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;
using Mat5 = Eigen::Matrix<double, 5, 5>;
using Mat9 = Eigen::Matrix<double, 9, 9>;
using Vec9 = Eigen::Matrix<double, 9, 1>;

// Error coordinates in the fixed block order (theta, vel, pos). Every
// consumer (Jacobians, covariance blocks) relies on this order.
struct TangentVector {
    Vec3 theta = Vec3::Zero();
    Vec3 vel = Vec3::Zero();
    Vec3 pos = Vec3::Zero();

    Vec9 stacked() const {
        Vec9 xi;
        xi << theta, vel, pos;
        return xi;
    }
    static TangentVector from_stacked(const Vec9& xi) {
        return {xi.head<3>(), xi.segment<3>(3), xi.tail<3>()};
    }
};

// Attitude, velocity and position of the body frame in the inertial frame,
// with the usual 5x5 homogeneous embedding (rotation block, two translation
// columns, identity bottom-right 2x2).
struct ExtendedPose {
    Mat3 rotation = Mat3::Identity();
    Vec3 velocity = Vec3::Zero();
    Vec3 position = Vec3::Zero();

    Mat5 as_matrix() const;
    static ExtendedPose from_matrix(const Mat5& m);
    static ExtendedPose identity() { return {}; }
};

Mat3 so3_wedge(const Vec3& phi);
Vec3 so3_vee(const Mat3& m);

Mat5 se23_wedge(const TangentVector& xi);
TangentVector se23_vee(const Mat5& m);

// Closed-form Rodrigues exponential.
Mat3 exp_so3(const Vec3& phi);

// Principal-branch logarithm. Throws NumericError when the rotation angle is
// within 1e-7 of pi (principal branch ambiguous at the cut locus).
Vec3 log_so3(const Mat3& c);

Mat3 so3_left_jacobian(const Vec3& phi);
Mat3 so3_left_jacobian_inv(const Vec3& phi);

ExtendedPose exp_se23(const TangentVector& xi);
TangentVector log_se23(const ExtendedPose& x);

ExtendedPose compose(const ExtendedPose& a, const ExtendedPose& b);

// Closed form (C^T, -C^T v, -C^T r); never a general matrix inverse.
ExtendedPose inverse(const ExtendedPose& x);

// Left-invariant group error X_true^-1 * X_est.
ExtendedPose left_error(const ExtendedPose& x_true, const ExtendedPose& x_est);

// Nearest rotation in Frobenius norm (polar decomposition via SVD).
Mat3 project_so3(const Mat3& c);

// ||C^T C - I||_F, the orthonormality defect.
double rotation_defect(const Mat3& c);

bool is_rotation(const Mat3& c, double tol = 1e-9);

}  // namespace invariant::lie
