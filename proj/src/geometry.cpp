#include "diffeo/geometry.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace diffeo {
namespace {

Quat positive_w(const Quat& q) {
  if (q.w() < 0.0) return Quat(-q.w(), -q.x(), -q.y(), -q.z());
  return q;
}

}  // namespace

double rbf(const Vec3& p, double rho, const Vec3& c) {
  if (!p.allFinite() || !c.allFinite() || !std::isfinite(rho)) {
    throw std::domain_error("rbf: non-finite input");
  }
  return std::exp(-rho * rho * (p - c).squaredNorm());
}

Vec3 quat_log(const Quat& q_in) {
  const Quat q = positive_w(q_in);
  const double vec_norm = q.vec().norm();
  if (vec_norm < 1e-12) {
    // w is ~1 here; first-order term of the series.
    return q.vec() / q.w();
  }
  const double half_angle = std::atan2(vec_norm, q.w());
  return q.vec() * (half_angle / vec_norm);
}

Quat quat_exp(const Vec3& v) {
  const double norm = v.norm();
  Quat q;
  if (norm < 1e-12) {
    q = Quat(1.0, v.x(), v.y(), v.z());
  } else {
    const double scale = std::sin(norm) / norm;
    q = Quat(std::cos(norm), scale * v.x(), scale * v.y(), scale * v.z());
  }
  q.normalize();
  return q;
}

Quat quat_pow(const Quat& q, double t) { return quat_exp(t * quat_log(q)); }

double quat_angle(const Quat& q_in) {
  const Quat q = positive_w(q_in);
  return 2.0 * std::atan2(q.vec().norm(), q.w());
}

Quat quat_between_directions(const Vec3& from, const Vec3& to) {
  const double from_norm = from.norm();
  const double to_norm = to.norm();
  if (from_norm < 1e-9 || to_norm < 1e-9) return Quat::Identity();
  const Vec3 a = from / from_norm;
  const Vec3 b = to / to_norm;
  const Vec3 cross = a.cross(b);
  const double sin_angle = cross.norm();
  const double cos_angle = a.dot(b);
  if (sin_angle < 1e-12) {
    if (cos_angle > 0.0) return Quat::Identity();
    // Antiparallel: half turn about a fixed perpendicular axis.
    Vec3 axis = a.cross(Vec3::UnitX());
    if (axis.norm() < 1e-9) axis = a.cross(Vec3::UnitY());
    axis.normalize();
    return quat_exp(axis * (std::numbers::pi / 2.0));
  }
  const double angle = std::atan2(sin_angle, cos_angle);
  return quat_exp(cross * (0.5 * angle / sin_angle));
}

double twist_angle(double x, double amplitude, double rho_sig) {
  return amplitude / (1.0 + std::exp(-rho_sig * x));
}

Mat3 rot_roll(double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  Mat3 m;
  m << 1, 0, 0,
       0, c, -s,
       0, s, c;
  return m;
}

Mat3 rot_pitch(double theta) {
  const double c = std::cos(theta);
  const double s = std::sin(theta);
  Mat3 m;
  m << c, 0, s,
       0, 1, 0,
       -s, 0, c;
  return m;
}

Mat3 rot_yaw(double psi) {
  const double c = std::cos(psi);
  const double s = std::sin(psi);
  Mat3 m;
  m << c, -s, 0,
       s, c, 0,
       0, 0, 1;
  return m;
}

Mat3 twist_rotation(double phi_t, double theta_t) {
  const Mat3 proj = Vec3(1.0, 1.0, 0.0).asDiagonal();
  return proj * rot_pitch(theta_t) * proj * rot_roll(phi_t) +
         (Mat3::Identity() - proj);
}

Mat3 affine_factor(const TwistedAffineParams& params) {
  const Mat3 scaling = params.scaling.asDiagonal();
  Mat3 shear;
  shear << 1, params.shear.x(), params.shear.y(),
           0, 1, params.shear.z(),
           0, 0, 1;
  const Mat3 rotation = rot_yaw(params.rotation.z()) *
                        rot_pitch(params.rotation.y()) *
                        rot_roll(params.rotation.x());
  const Mat3 reflection = params.reflection.asDiagonal();
  return scaling * shear * rotation * reflection;
}

Mat3 make_rotation_factors(const TwistedAffineParams& params, const Vec3& p) {
  const double phi_t = twist_angle(p.x(), params.twist_roll, params.rho_sig);
  const double theta_t = twist_angle(p.y(), params.twist_pitch, params.rho_sig);
  return affine_factor(params) * twist_rotation(phi_t, theta_t);
}

Vec3 twisted_affine_apply(const TwistedAffineParams& params, const Vec3& p) {
  const Vec3 d = p - params.mu_init;
  return make_rotation_factors(params, d) * d + params.mu_goal;
}

}  // namespace diffeo
