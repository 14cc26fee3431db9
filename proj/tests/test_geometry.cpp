#include <doctest.h>

#include <cmath>
#include <numbers>

#include "diffeo/geometry.hpp"
#include "diffeo/rng.hpp"

using namespace diffeo;

namespace {

constexpr double kPi = std::numbers::pi;

Quat rot_z_quat(double angle) {
  return Quat(Eigen::AngleAxisd(angle, Vec3::UnitZ()));
}

Quat random_unit_quat(Rng& rng) {
  Quat q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  if (q.norm() < 1e-6) return Quat::Identity();
  q.normalize();
  return q;
}

}  // namespace

TEST_CASE("rbf basics") {
  const Vec3 c(0.2, -0.1, 0.4);
  CHECK(rbf(c, 3.7, c) == doctest::Approx(1.0));
  CHECK(rbf(Vec3(9.0, -2.0, 1.0), 0.0, c) == doctest::Approx(1.0));
  CHECK(rbf(Vec3(1, 0, 0), 1.0, Vec3::Zero()) ==
        doctest::Approx(std::exp(-1.0)).epsilon(1e-12));
}

TEST_CASE("rbf rejects non-finite input") {
  const double nan = std::nan("");
  CHECK_THROWS_AS(rbf(Vec3(nan, 0, 0), 1.0, Vec3::Zero()), std::domain_error);
  CHECK_THROWS_AS(rbf(Vec3::Zero(), nan, Vec3::Zero()), std::domain_error);
  CHECK_THROWS_AS(rbf(Vec3::Zero(), 1.0, Vec3(0, nan, 0)), std::domain_error);
}

TEST_CASE("rbf stays in (0, 1]") {
  Rng rng(11);
  for (int i = 0; i < 500; ++i) {
    const Vec3 p(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const Vec3 c(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2));
    const double value = rbf(p, rng.uniform(0, 3.5), c);
    CHECK(value > 0.0);
    CHECK(value <= 1.0);
  }
}

TEST_CASE("quat_log basics") {
  CHECK(quat_log(Quat::Identity()).norm() == doctest::Approx(0.0));
  const Vec3 log_z = quat_log(rot_z_quat(kPi / 2));
  CHECK(log_z.x() == doctest::Approx(0.0));
  CHECK(log_z.y() == doctest::Approx(0.0));
  CHECK(log_z.z() == doctest::Approx(kPi / 4).epsilon(1e-12));
}

TEST_CASE("quat_log norm matches the acos oracle") {
  Rng rng(17);
  for (int i = 0; i < 100; ++i) {
    const Quat q = random_unit_quat(rng);
    const double expected = std::acos(std::min(1.0, std::abs(q.w())));
    CHECK(quat_log(q).norm() == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("quat_log is stable near the pi rotation") {
  // w slightly below zero: flipped to the short arc, never NaN.
  Quat q(-1e-14, std::sqrt(0.5), std::sqrt(0.5), 0.0);
  q.normalize();
  const Vec3 log = quat_log(q);
  CHECK(std::isfinite(log.x()));
  CHECK(log.norm() == doctest::Approx(kPi / 2).epsilon(1e-9));
  CHECK(quat_log(Quat(-1.0, 0.0, 0.0, 0.0)).norm() == doctest::Approx(0.0));
}

TEST_CASE("quat_exp basics and round trip") {
  CHECK(quat_exp(Vec3::Zero()).isApprox(Quat::Identity(), 1e-15));
  CHECK(quat_exp(Vec3(0, 0, kPi / 4)).isApprox(rot_z_quat(kPi / 2), 1e-12));
  Rng rng(23);
  for (int i = 0; i < 1000; ++i) {
    Quat q = random_unit_quat(rng);
    if (q.w() < 0.0) q.coeffs() = -q.coeffs();
    const Quat back = quat_exp(quat_log(q));
    CHECK(back.angularDistance(q) < 1e-9);
    CHECK(std::abs(back.norm() - 1.0) < 1e-9);
  }
}

TEST_CASE("quat_pow endpoints, additivity and angle scaling") {
  Rng rng(29);
  for (int i = 0; i < 200; ++i) {
    const Quat v = random_unit_quat(rng);
    CHECK(quat_pow(v, 0.0).angularDistance(Quat::Identity()) < 1e-12);
    CHECK(quat_pow(v, 1.0).angularDistance(v) < 1e-9);
    const double a = rng.uniform(0.0, 0.5);
    const double b = rng.uniform(0.0, 0.5);
    const Quat lhs = quat_pow(v, a) * quat_pow(v, b);
    const Quat rhs = quat_pow(v, a + b);
    CHECK(lhs.angularDistance(rhs) < 1e-9);
    const double t = rng.unit();
    CHECK(quat_angle(quat_pow(v, t)) ==
          doctest::Approx(t * quat_angle(v)).epsilon(1e-9));
  }
}

TEST_CASE("quat_between_directions") {
  const Quat r =
      quat_between_directions(Vec3(1, 0, 0), Vec3(0, 1, 0));
  CHECK(r.angularDistance(rot_z_quat(kPi / 2)) < 1e-12);
  CHECK(quat_between_directions(Vec3(2, 2, 0), Vec3(1, 1, 0))
            .angularDistance(Quat::Identity()) < 1e-12);
  CHECK(quat_between_directions(Vec3::Zero(), Vec3(1, 0, 0))
            .angularDistance(Quat::Identity()) < 1e-12);

  // Antiparallel: half turn, deterministic axis.
  const Quat flip = quat_between_directions(Vec3(0, 1, 0), Vec3(0, -1, 0));
  CHECK(quat_angle(flip) == doctest::Approx(kPi).epsilon(1e-12));
  const Vec3 rotated = flip * Vec3(0, 1, 0);
  CHECK((rotated - Vec3(0, -1, 0)).norm() < 1e-12);
  const Quat flip_x = quat_between_directions(Vec3(1, 0, 0), Vec3(-1, 0, 0));
  CHECK(quat_angle(flip_x) == doctest::Approx(kPi).epsilon(1e-12));
}

TEST_CASE("twist_angle sigmoid") {
  CHECK(twist_angle(0.0, kPi, 10.0) == doctest::Approx(kPi / 2).epsilon(1e-12));
  CHECK(twist_angle(100.0, kPi, 10.0) == doctest::Approx(kPi).epsilon(1e-12));
  CHECK(twist_angle(-100.0, kPi, 10.0) == doctest::Approx(0.0));
  const double expected = kPi / (1.0 + std::exp(-1.0));
  CHECK(twist_angle(0.1, kPi, 10.0) == doctest::Approx(expected).epsilon(1e-12));
  // Monotone in x.
  double prev = twist_angle(-1.0, kPi, 10.0);
  for (double x = -0.9; x <= 1.0; x += 0.1) {
    const double cur = twist_angle(x, kPi, 10.0);
    CHECK(cur >= prev);
    prev = cur;
  }
}

TEST_CASE("twist_rotation matches the directly composed construction") {
  Rng rng(37);
  for (int i = 0; i < 100; ++i) {
    const double phi = rng.uniform(-kPi, kPi);
    const double theta = rng.uniform(-kPi, kPi);
    const Mat3 proj = Vec3(1, 1, 0).asDiagonal();
    const Mat3 oracle =
        proj * rot_pitch(theta) * proj * rot_roll(phi) +
        (Mat3::Identity() - proj);
    CHECK((twist_rotation(phi, theta) - oracle).cwiseAbs().maxCoeff() < 1e-12);
    // Closed form: diag-ish [c_theta, (c_phi, -s_phi), 1].
    Mat3 closed = Mat3::Zero();
    closed(0, 0) = std::cos(theta);
    closed(1, 1) = std::cos(phi);
    closed(1, 2) = -std::sin(phi);
    closed(2, 2) = 1.0;
    CHECK((twist_rotation(phi, theta) - closed).cwiseAbs().maxCoeff() < 1e-12);
  }
  CHECK(twist_rotation(0.0, 0.0).isApprox(Mat3::Identity(), 1e-15));
}

TEST_CASE("make_rotation_factors identity and reflection determinant") {
  TwistedAffineParams params;
  CHECK(make_rotation_factors(params, Vec3(0.3, -0.2, 0.7))
            .isApprox(Mat3::Identity(), 1e-12));

  for (double rx : {-1.0, 1.0}) {
    for (double ry : {-1.0, 1.0}) {
      for (double rz : {-1.0, 1.0}) {
        TwistedAffineParams p;
        p.reflection = Vec3(rx, ry, rz);
        const Mat3 m = make_rotation_factors(p, Vec3::Zero());
        CHECK(m.determinant() == doctest::Approx(rx * ry * rz).epsilon(1e-12));
      }
    }
  }

  // Zero twist amplitudes: identity twist factor at any position.
  TwistedAffineParams p;
  p.scaling = Vec3(1.4, 0.7, 1.9);
  Rng rng(41);
  for (int i = 0; i < 20; ++i) {
    const Vec3 at(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    CHECK(make_rotation_factors(p, at).isApprox(
        Mat3(p.scaling.asDiagonal()), 1e-12));
  }
}

TEST_CASE("make_rotation_factors with identity B and no shear is diagonal") {
  TwistedAffineParams p;
  p.scaling = Vec3(0.6, 1.8, 1.1);
  const Mat3 m = make_rotation_factors(p, Vec3(0.25, -0.4, 0.1));
  Mat3 expected = Mat3::Zero();
  expected(0, 0) = 0.6;
  expected(1, 1) = 1.8;
  expected(2, 2) = 1.1;
  CHECK((m - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("twisted_affine_apply recenters correctly") {
  TwistedAffineParams p;
  p.mu_init = Vec3(0.5, 0.5, 1.0);
  p.mu_goal = Vec3(0.2, -0.1, 0.9);
  p.translation = p.mu_goal - p.mu_init;
  // Identity matrix part: map is a pure recentring translation.
  CHECK((twisted_affine_apply(p, Vec3(0.6, 0.4, 1.2)) -
         Vec3(0.3, -0.2, 1.1))
            .norm() < 1e-12);
}
