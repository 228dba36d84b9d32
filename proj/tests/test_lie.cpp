#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "invariant/errors.hpp"
#include "invariant/lie.hpp"
#include "oracles.hpp"

using namespace invariant;
using namespace invariant::lie;
using oracles::near_mat;
using oracles::RandomSource;

namespace {
constexpr double kPi = 3.14159265358979323846;
}

TEST_CASE("so3 wedge basics") {
    CHECK(so3_wedge(Vec3::Zero()).isZero(0.0));

    Mat3 expected;
    expected << 0, -1, 0, 1, 0, 0, 0, 0, 0;
    CHECK(near_mat(so3_wedge(Vec3(0, 0, 1)), expected, 0.0));

    // wedge(e1) * e2 = e3
    CHECK(near_mat(so3_wedge(Vec3::UnitX()) * Vec3::UnitY(), Vec3::UnitZ(), 0.0));

    RandomSource rnd(11);
    for (int i = 0; i < 100; ++i) {
        const Vec3 a = rnd.vec3(10.0);
        const Vec3 b = rnd.vec3(10.0);
        CHECK(near_mat(so3_wedge(a).transpose(), Mat3(-so3_wedge(a)), 0.0));       // antisymmetry
        CHECK(near_mat(so3_wedge(a) * b, Vec3(a.cross(b)), 1e-14 * a.norm() * b.norm()));
        CHECK(near_mat(so3_vee(so3_wedge(a)), a, 0.0));  // exact roundtrip
    }
}

TEST_CASE("se23 wedge layout and roundtrip") {
    CHECK(se23_wedge(TangentVector{}).isZero(0.0));

    TangentVector basis;
    basis.vel = Vec3::UnitX();
    Mat5 m = se23_wedge(basis);
    CHECK(m(0, 3) == 1.0);
    m(0, 3) = 0.0;
    CHECK(m.isZero(0.0));

    RandomSource rnd(12);
    for (int i = 0; i < 100; ++i) {
        const Vec9 xi = rnd.vec9(10.0);
        const TangentVector tv = TangentVector::from_stacked(xi);
        const Mat5 w = se23_wedge(tv);
        CHECK(near_mat(w.topLeftCorner<3, 3>(), so3_wedge(tv.theta), 0.0));
        CHECK(w.bottomRows<2>().isZero(0.0));
        CHECK(near_mat(se23_vee(w).stacked(), xi, 0.0));
    }
}

TEST_CASE("exp_so3 closed form") {
    CHECK(near_mat(exp_so3(Vec3::Zero()), Mat3::Identity(), 0.0));

    Mat3 quarter_turn;
    quarter_turn << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK(near_mat(exp_so3(Vec3(0, 0, kPi / 2)), quarter_turn, 1e-15));

    RandomSource rnd(13);
    for (int i = 0; i < 200; ++i) {
        const Mat3 c = exp_so3(rnd.rotation_vector(3.1));
        CHECK(rotation_defect(c) < 1e-13);
        CHECK(c.determinant() == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("exp_se23 small-xi approximation") {
    RandomSource rnd(14);
    // Taylor remainder at ||xi|| = 1e-3.
    for (int i = 0; i < 50; ++i) {
        Vec9 xi = rnd.vec9(1.0);
        xi *= 1e-3 / xi.norm();
        const TangentVector tv = TangentVector::from_stacked(xi);
        const Mat5 linear = Mat5::Identity() + se23_wedge(tv);
        CHECK((exp_se23(tv).as_matrix() - linear).norm() <= 1e-6);
    }
    // Quadratic remainder bound for ||xi|| <= 0.1.
    for (int i = 0; i < 50; ++i) {
        Vec9 xi = rnd.vec9(1.0);
        xi *= rnd.uniform(0.0, 0.1) / xi.norm();
        const TangentVector tv = TangentVector::from_stacked(xi);
        const Mat5 linear = Mat5::Identity() + se23_wedge(tv);
        CHECK((exp_se23(tv).as_matrix() - linear).norm() <= xi.squaredNorm());
    }
}

TEST_CASE("log_so3 basics and branch handling") {
    CHECK(near_mat(log_so3(Mat3::Identity()), Vec3::Zero(), 0.0));

    Mat3 quarter_turn;
    quarter_turn << 0, -1, 0, 1, 0, 0, 0, 0, 1;
    CHECK(near_mat(log_so3(quarter_turn), Vec3(0, 0, kPi / 2), 1e-14));

    // Rejection at the cut locus.
    CHECK_THROWS_AS((void)log_so3(exp_so3(Vec3(kPi - 1e-9, 0, 0))), NumericError);
    CHECK_THROWS_AS((void)log_so3(exp_so3(Vec3(0, kPi, 0))), NumericError);
    // Just inside the threshold still works.
    CHECK_NOTHROW((void)log_so3(exp_so3(Vec3(kPi - 1e-3, 0, 0))));
}

TEST_CASE("exp/log roundtrips") {
    RandomSource rnd(15);
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
        const Vec3 phi = rnd.rotation_vector(3.0);
        worst = std::max(worst, (log_so3(exp_so3(phi)) - phi).norm());
    }
    CHECK(worst <= 1e-9);

    for (int i = 0; i < 1000; ++i) {
        Vec9 xi = rnd.vec9(4.0);
        xi.head<3>() = rnd.rotation_vector(3.0);
        const TangentVector tv = TangentVector::from_stacked(xi);
        const ExtendedPose x = exp_se23(tv);
        CHECK((log_se23(x).stacked() - xi).norm() <= 1e-9 * std::max(1.0, xi.norm()));
        // exp(log(X)) = X
        CHECK((exp_se23(log_se23(x)).as_matrix() - x.as_matrix()).norm() <= 1e-9);
    }
}

TEST_CASE("compose and inverse group axioms") {
    RandomSource rnd(16);
    const ExtendedPose x = rnd.pose();
    CHECK(near_mat(compose(ExtendedPose::identity(), x).as_matrix(), x.as_matrix(), 0.0));
    CHECK(near_mat(inverse(ExtendedPose::identity()).as_matrix(), Mat5::Identity(), 0.0));

    for (int i = 0; i < 100; ++i) {
        const ExtendedPose a = rnd.pose();
        const ExtendedPose b = rnd.pose();
        CHECK(near_mat(compose(a, inverse(a)).as_matrix(), Mat5::Identity(), 1e-9));
        // Matches the dense 5x5 product.
        CHECK(near_mat(compose(a, b).as_matrix(), Mat5(a.as_matrix() * b.as_matrix()), 1e-12));
        // Closure: the composite is still a valid group element.
        const ExtendedPose c = compose(a, b);
        CHECK(rotation_defect(c.rotation) <= 1e-9);
    }
}

TEST_CASE("left error definition and subblocks") {
    RandomSource rnd(17);
    const ExtendedPose x = rnd.pose();
    CHECK(near_mat(left_error(x, x).as_matrix(), Mat5::Identity(), 1e-12));
    CHECK(near_mat(left_error(ExtendedPose::identity(), x).as_matrix(), x.as_matrix(), 0.0));

    for (int i = 0; i < 100; ++i) {
        const ExtendedPose x_true = rnd.pose();
        const ExtendedPose x_est = rnd.pose();
        const ExtendedPose err = left_error(x_true, x_est);
        // Subblock expressions dC = C^T Chat, dv = C^T (vhat - v), dr = C^T (rhat - r).
        CHECK(near_mat(err.rotation, Mat3(x_true.rotation.transpose() * x_est.rotation), 1e-13));
        CHECK(near_mat(err.velocity,
                       Vec3(x_true.rotation.transpose() * (x_est.velocity - x_true.velocity)),
                       1e-12));
        CHECK(near_mat(err.position,
                       Vec3(x_true.rotation.transpose() * (x_est.position - x_true.position)),
                       1e-12));
        // And against the dense 5x5 product.
        CHECK(near_mat(err.as_matrix(),
                       Mat5(x_true.as_matrix().inverse() * x_est.as_matrix()), 1e-11));
    }
}

TEST_CASE("project_so3 restores orthonormality") {
    RandomSource rnd(18);
    for (int i = 0; i < 50; ++i) {
        Mat3 noisy = rnd.rotation();
        noisy += 1e-6 * Mat3::Random();
        const Mat3 fixed = project_so3(noisy);
        CHECK(rotation_defect(fixed) < 1e-14);
        CHECK((fixed - noisy).norm() < 1e-5);
    }
}
