#include "invariant/lie.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "invariant/errors.hpp"

namespace invariant::lie {

namespace {

constexpr double kPi = 3.14159265358979323846;
// Below this angle the sin/cos ratios switch to their Taylor series.
constexpr double kSmallAngle = 1e-6;
// Principal branch rejected this close to pi.
constexpr double kCutLocusTol = 1e-7;

}  // namespace

Mat5 ExtendedPose::as_matrix() const {
    Mat5 m = Mat5::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.block<3, 1>(0, 3) = velocity;
    m.block<3, 1>(0, 4) = position;
    return m;
}

ExtendedPose ExtendedPose::from_matrix(const Mat5& m) {
    ExtendedPose x;
    x.rotation = m.topLeftCorner<3, 3>();
    x.velocity = m.block<3, 1>(0, 3);
    x.position = m.block<3, 1>(0, 4);
    return x;
}

Mat3 so3_wedge(const Vec3& phi) {
    Mat3 m;
    // clang-format off
    m <<      0, -phi.z(),  phi.y(),
         phi.z(),       0, -phi.x(),
        -phi.y(),  phi.x(),       0;
    // clang-format on
    return m;
}

Vec3 so3_vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat5 se23_wedge(const TangentVector& xi) {
    Mat5 m = Mat5::Zero();
    m.topLeftCorner<3, 3>() = so3_wedge(xi.theta);
    m.block<3, 1>(0, 3) = xi.vel;
    m.block<3, 1>(0, 4) = xi.pos;
    return m;
}

TangentVector se23_vee(const Mat5& m) {
    TangentVector xi;
    xi.theta = so3_vee(m.topLeftCorner<3, 3>());
    xi.vel = m.block<3, 1>(0, 3);
    xi.pos = m.block<3, 1>(0, 4);
    return xi;
}

Mat3 exp_so3(const Vec3& phi) {
    const double theta = phi.norm();
    const Mat3 px = so3_wedge(phi);
    double a, b;  // exp = I + a*phi^x + b*(phi^x)^2
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        a = 1.0 - t2 / 6.0;
        b = 0.5 - t2 / 24.0;
    } else {
        a = std::sin(theta) / theta;
        b = (1.0 - std::cos(theta)) / (theta * theta);
    }
    return Mat3::Identity() + a * px + b * px * px;
}

Vec3 log_so3(const Mat3& c) {
    const double cos_theta = std::clamp(0.5 * (c.trace() - 1.0), -1.0, 1.0);
    const double theta = std::acos(cos_theta);
    if (kPi - theta < kCutLocusTol) {
        throw NumericError("so3 logarithm near cut locus (rotation angle within 1e-7 of pi)");
    }
    const Vec3 w = so3_vee(0.5 * (c - c.transpose()));  // = sin(theta) * axis
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        return (1.0 + t2 / 6.0 + 7.0 * t2 * t2 / 360.0) * w;
    }
    if (theta > kPi - 1e-2) {
        // Near pi the antisymmetric part degrades; recover the axis from the
        // symmetric part and use w only for the sign.
        const Mat3 b = (0.5 * (c + c.transpose()) - cos_theta * Mat3::Identity()) / (1.0 - cos_theta);
        int j;
        b.diagonal().maxCoeff(&j);
        Vec3 axis = b.col(j) / std::sqrt(b(j, j));
        if (axis.dot(w) < 0.0) axis = -axis;
        return theta * axis;
    }
    return (theta / std::sin(theta)) * w;
}

Mat3 so3_left_jacobian(const Vec3& phi) {
    const double theta = phi.norm();
    const Mat3 px = so3_wedge(phi);
    double a, b;  // J = I + a*phi^x + b*(phi^x)^2
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        a = 0.5 - t2 / 24.0;
        b = 1.0 / 6.0 - t2 / 120.0;
    } else {
        const double t2 = theta * theta;
        a = (1.0 - std::cos(theta)) / t2;
        b = (theta - std::sin(theta)) / (t2 * theta);
    }
    return Mat3::Identity() + a * px + b * px * px;
}

Mat3 so3_left_jacobian_inv(const Vec3& phi) {
    const double theta = phi.norm();
    const Mat3 px = so3_wedge(phi);
    double b;  // Jinv = I - phi^x/2 + b*(phi^x)^2
    if (theta < kSmallAngle) {
        const double t2 = theta * theta;
        b = 1.0 / 12.0 + t2 / 720.0;
    } else {
        // Half-angle cotangent form stays well conditioned up to the cut locus.
        const double half = 0.5 * theta;
        b = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
    }
    return Mat3::Identity() - 0.5 * px + b * px * px;
}

ExtendedPose exp_se23(const TangentVector& xi) {
    ExtendedPose x;
    x.rotation = exp_so3(xi.theta);
    const Mat3 j = so3_left_jacobian(xi.theta);
    x.velocity = j * xi.vel;
    x.position = j * xi.pos;
    return x;
}

TangentVector log_se23(const ExtendedPose& x) {
    TangentVector xi;
    xi.theta = log_so3(x.rotation);
    const Mat3 jinv = so3_left_jacobian_inv(xi.theta);
    xi.vel = jinv * x.velocity;
    xi.pos = jinv * x.position;
    return xi;
}

ExtendedPose compose(const ExtendedPose& a, const ExtendedPose& b) {
    ExtendedPose out;
    out.rotation = a.rotation * b.rotation;
    out.velocity = a.rotation * b.velocity + a.velocity;
    out.position = a.rotation * b.position + a.position;
    return out;
}

ExtendedPose inverse(const ExtendedPose& x) {
    ExtendedPose out;
    out.rotation = x.rotation.transpose();
    out.velocity = -(out.rotation * x.velocity);
    out.position = -(out.rotation * x.position);
    return out;
}

ExtendedPose left_error(const ExtendedPose& x_true, const ExtendedPose& x_est) {
    return compose(inverse(x_true), x_est);
}

Mat3 project_so3(const Mat3& c) {
    Eigen::JacobiSVD<Mat3> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
    Mat3 d = Mat3::Identity();
    d(2, 2) = (svd.matrixU() * svd.matrixV().transpose()).determinant();
    return svd.matrixU() * d * svd.matrixV().transpose();
}

double rotation_defect(const Mat3& c) {
    return (c.transpose() * c - Mat3::Identity()).norm();
}

bool is_rotation(const Mat3& c, double tol) {
    return rotation_defect(c) <= tol && std::abs(c.determinant() - 1.0) <= tol;
}

}  // namespace invariant::lie
