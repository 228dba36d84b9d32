#include "invariant/filters.hpp"

#include <cmath>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/MatrixFunctions>

#include "invariant/errors.hpp"

namespace invariant::filters {

namespace {

using Mat18 = Eigen::Matrix<double, 18, 18>;
using lie::so3_wedge;

// Post-correction orthonormality guard (polar projection past this defect).
constexpr double kReorthTol = 1e-9;
constexpr double kMaxCondition = 1e12;

Mat9 symmetrized(const Mat9& m) { return 0.5 * (m + m.transpose()); }

}  // namespace

FilterVariant variant_of(FilterKind kind) {
    return kind == FilterKind::Mekf2 ? FilterVariant::Mekf : FilterVariant::Iekf;
}

int receivers_of(FilterKind kind) { return kind == FilterKind::Iekf1 ? 1 : 2; }

std::string name_of(FilterKind kind) {
    switch (kind) {
        case FilterKind::Iekf2: return "iekf2";
        case FilterKind::Iekf1: return "iekf1";
        case FilterKind::Mekf2: return "mekf2";
    }
    return "unknown";
}

FilterKind kind_from_name(const std::string& name) {
    if (name == "iekf2") return FilterKind::Iekf2;
    if (name == "iekf1") return FilterKind::Iekf1;
    if (name == "mekf2") return FilterKind::Mekf2;
    throw ConfigError("unknown filter '" + name + "' (expected iekf2, iekf1 or mekf2)");
}

LinearizedProcess iekf_process_jacobians(const ImuSample& u) {
    const Mat3 gx = so3_wedge(u.gyro);
    const Mat3 ax = so3_wedge(u.accel);
    LinearizedProcess lin;
    lin.a_c.block<3, 3>(0, 0) = -gx;
    lin.a_c.block<3, 3>(3, 0) = -ax;
    lin.a_c.block<3, 3>(3, 3) = -gx;
    lin.a_c.block<3, 3>(6, 3) = Mat3::Identity();
    lin.a_c.block<3, 3>(6, 6) = -gx;
    lin.l_c.block<3, 3>(0, 0) = -Mat3::Identity();
    lin.l_c.block<3, 3>(3, 3) = -Mat3::Identity();
    return lin;
}

LinearizedProcess mekf_process_jacobians(const ImuSample& u, const Mat3& c_est) {
    LinearizedProcess lin;
    lin.a_c.block<3, 3>(0, 0) = -so3_wedge(u.gyro);
    lin.a_c.block<3, 3>(3, 0) = -c_est * so3_wedge(u.accel);
    lin.a_c.block<3, 3>(6, 3) = Mat3::Identity();
    lin.l_c.block<3, 3>(0, 0) = -Mat3::Identity();
    lin.l_c.block<3, 3>(3, 3) = -c_est;
    return lin;
}

std::pair<Mat9, Mat9> discretize(const LinearizedProcess& lin, const NoiseModel& noise, double dt) {
    if (dt <= 0.0) throw NumericError("discretize requires dt > 0");
    Mat9 q_tilde = Mat9::Zero();
    q_tilde.block<3, 3>(0, 0) = noise.gyro_psd;
    q_tilde.block<3, 3>(3, 3) = noise.accel_psd;

    Mat18 m = Mat18::Zero();
    m.topLeftCorner<9, 9>() = -lin.a_c;
    m.topRightCorner<9, 9>() = lin.l_c * q_tilde * lin.l_c.transpose();
    m.bottomRightCorner<9, 9>() = lin.a_c.transpose();
    m *= dt;

    const Mat18 v = m.exp();
    const Mat9 a_d = v.bottomRightCorner<9, 9>().transpose();
    const Mat9 q_d = symmetrized(a_d * v.topRightCorner<9, 9>());
    if (!a_d.allFinite() || !q_d.allFinite()) {
        throw NumericError("Van Loan discretization produced non-finite values");
    }
    return {a_d, q_d};
}

FilterState predict(const FilterState& state, const ImuSample& u, const NoiseModel& noise,
                    const models::GravityModel& gravity, double dt, FilterVariant variant) {
    const LinearizedProcess lin = variant == FilterVariant::Iekf
                                      ? iekf_process_jacobians(u)
                                      : mekf_process_jacobians(u, state.mean.rotation);
    const auto [a_d, q_d] = discretize(lin, noise, dt);
    FilterState out;
    out.mean = models::propagate_mean(state.mean, u, gravity, dt);
    out.cov = symmetrized(a_d * state.cov * a_d.transpose() + q_d);
    out.t = state.t + dt;
    return out;
}

namespace {

Eigen::MatrixXd joint_covariance(const NoiseModel& noise, int receivers) {
    if (receivers == 1) return noise.r1;
    Eigen::MatrixXd r(6, 6);
    r.topLeftCorner<3, 3>() = noise.r1;
    r.topRightCorner<3, 3>() = -noise.r1;
    r.bottomLeftCorner<3, 3>() = -noise.r1;
    r.bottomRightCorner<3, 3>() = noise.r1 + noise.r2;
    return r;
}

void check_receivers(const ReceiverGeometry& geom, int receivers) {
    if (receivers != 1 && receivers != 2) {
        throw ConfigError("receivers must be 1 or 2");
    }
    if (receivers == 2 && geom.baseline().norm() <= 0.0) {
        throw ConfigError("two-receiver mode requires a nonzero baseline");
    }
}

}  // namespace

LinearizedMeasurement iekf_meas_jacobians(const ReceiverGeometry& geom, const NoiseModel& noise,
                                          const ExtendedPose& x_pred, int receivers) {
    check_receivers(geom, receivers);
    const int rows = 3 * receivers;
    LinearizedMeasurement lin;
    lin.h = Eigen::MatrixXd::Zero(rows, 9);
    lin.h.block<3, 3>(0, 0) = so3_wedge(geom.lever1);
    lin.h.block<3, 3>(0, 6) = -Mat3::Identity();
    lin.m = Eigen::MatrixXd::Zero(rows, rows);
    lin.m.block<3, 3>(0, 0) = x_pred.rotation.transpose();
    if (receivers == 2) {
        lin.h.block<3, 3>(3, 0) = so3_wedge(geom.baseline());
        lin.m.block<3, 3>(3, 3) = x_pred.rotation.transpose();
    }
    lin.r_joint = joint_covariance(noise, receivers);
    return lin;
}

LinearizedMeasurement mekf_meas_jacobians(const ReceiverGeometry& geom, const NoiseModel& noise,
                                          const Mat3& c_pred, int receivers) {
    check_receivers(geom, receivers);
    const int rows = 3 * receivers;
    LinearizedMeasurement lin;
    lin.h = Eigen::MatrixXd::Zero(rows, 9);
    lin.h.block<3, 3>(0, 0) = -c_pred * so3_wedge(geom.lever1);
    lin.h.block<3, 3>(0, 6) = Mat3::Identity();
    if (receivers == 2) {
        lin.h.block<3, 3>(3, 0) = -c_pred * so3_wedge(geom.baseline());
    }
    lin.m = Eigen::MatrixXd::Identity(rows, rows);
    lin.r_joint = joint_covariance(noise, receivers);
    return lin;
}

Eigen::VectorXd iekf_innovation(const ExtendedPose& x_pred, const Vec3& y1, const Vec3& rel,
                                const ReceiverGeometry& geom, int receivers) {
    check_receivers(geom, receivers);
    using Vec5 = Eigen::Matrix<double, 5, 1>;
    const lie::Mat5 x = x_pred.as_matrix();
    const lie::Mat5 x_inv = lie::inverse(x_pred).as_matrix();

    Vec5 b1, y1_lift;
    b1 << geom.lever1, 0.0, 1.0;
    y1_lift << y1, 0.0, 1.0;
    Eigen::VectorXd z(3 * receivers);
    z.head<3>() = (x_inv * (y1_lift - x * b1)).head<3>();
    if (receivers == 2) {
        Vec5 b2, rel_lift;
        b2 << geom.baseline(), 0.0, 0.0;
        rel_lift << rel, 0.0, 0.0;
        z.tail<3>() = (x_inv * (rel_lift - x * b2)).head<3>();
    }
    return z;
}

Eigen::VectorXd mekf_innovation(const ExtendedPose& x_pred, const Vec3& y1, const Vec3& rel,
                                const ReceiverGeometry& geom, int receivers) {
    check_receivers(geom, receivers);
    Eigen::VectorXd dy(3 * receivers);
    dy.head<3>() = y1 - (x_pred.rotation * geom.lever1 + x_pred.position);
    if (receivers == 2) {
        dy.tail<3>() = rel - x_pred.rotation * geom.baseline();
    }
    return dy;
}

CorrectResult correct(const FilterState& state, const LinearizedMeasurement& lin,
                      const Eigen::VectorXd& z, FilterVariant variant) {
    const Eigen::MatrixXd meas_cov = lin.m * lin.r_joint * lin.m.transpose();
    Eigen::MatrixXd s = lin.h * state.cov * lin.h.transpose() + meas_cov;
    s = 0.5 * (s + s.transpose());

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(s);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (lo <= 0.0 || hi / lo > kMaxCondition) {
        throw NumericError("singular innovation covariance (condition number above 1e12)");
    }

    const Eigen::LLT<Eigen::MatrixXd> llt(s);
    const Eigen::MatrixXd gain = llt.solve(lin.h * state.cov).transpose();  // P H^T S^-1
    const Vec9 dx = gain * z;

    CorrectResult out;
    out.state.t = state.t;
    if (variant == FilterVariant::Iekf) {
        out.state.mean =
            lie::compose(state.mean, lie::exp_se23(lie::TangentVector::from_stacked(-dx)));
    } else {
        out.state.mean.rotation = state.mean.rotation * lie::exp_so3(dx.head<3>());
        out.state.mean.velocity = state.mean.velocity + dx.segment<3>(3);
        out.state.mean.position = state.mean.position + dx.tail<3>();
    }
    if (lie::rotation_defect(out.state.mean.rotation) > kReorthTol) {
        out.state.mean.rotation = lie::project_so3(out.state.mean.rotation);
    }

    const Mat9 ikh = Mat9::Identity() - gain * lin.h;
    out.state.cov =
        symmetrized(ikh * state.cov * ikh.transpose() + gain * meas_cov * gain.transpose());
    out.nis = z.dot(llt.solve(z));
    return out;
}

}  // namespace invariant::filters
