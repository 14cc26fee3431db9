#include "diffeo/mapping.hpp"

#include <Eigen/SVD>

#include <stdexcept>

namespace diffeo {

std::string method_name(Method method) {
  switch (method) {
    case Method::Diff:
      return "diff";
    case Method::RDiff:
      return "rdiff";
    case Method::TaDiff:
      return "tadiff";
  }
  return "diff";
}

Method method_from_name(const std::string& name) {
  if (name == "diff") return Method::Diff;
  if (name == "rdiff") return Method::RDiff;
  if (name == "tadiff") return Method::TaDiff;
  throw std::invalid_argument("unknown method '" + name +
                              "' (expected diff, rdiff or tadiff)");
}

Vec3 apply_position_step(const CompositionStep& step, const Vec3& p,
                         bool orbital_about_center) {
  const double weight = rbf(p, step.rho, step.center);
  switch (step.kind) {
    case StepKind::Translation:
      return p + weight * step.v_translation;
    case StepKind::Orbital: {
      const Quat u = quat_pow(step.v_rotation, weight);
      const Vec3 base = orbital_about_center ? Vec3(p - step.center) : p;
      const Quat pure(0.0, base.x(), base.y(), base.z());
      Vec3 rotated = (u * pure * u.conjugate()).vec();
      if (orbital_about_center) rotated += step.center;
      return rotated + weight * step.v_translation;
    }
    case StepKind::Spin:
      return p;  // spin steps act on orientation only
  }
  return p;
}

Vec3 map_position(const DiffeoMap& map, const Vec3& p_in) {
  Vec3 p = map.ta_prefix ? twisted_affine_apply(*map.ta_prefix, p_in) : p_in;
  for (const auto& step : map.position_steps) {
    p = apply_position_step(step, p, map.orbital_about_center);
  }
  return p;
}

Quat map_orientation(const DiffeoMap& map, const Vec3& p_in, const Quat& q_in) {
  Vec3 p = map.ta_prefix ? twisted_affine_apply(*map.ta_prefix, p_in) : p_in;
  Quat q = q_in.normalized();
  const std::size_t rounds =
      std::max(map.position_steps.size(), map.orientation_steps.size());
  for (std::size_t j = 0; j < rounds; ++j) {
    if (j < map.orientation_steps.size()) {
      const auto& step = map.orientation_steps[j];
      const double weight = rbf(p, step.rho, step.center);
      q = (quat_pow(step.v_rotation, weight) * q).normalized();
    }
    if (j < map.position_steps.size()) {
      p = apply_position_step(map.position_steps[j], p,
                              map.orbital_about_center);
    }
  }
  return q;
}

std::pair<Vec3, Quat> map_pose(const DiffeoMap& map, const Vec3& p,
                               const Quat& q) {
  return {map_position(map, p), map_orientation(map, p, q)};
}

Mat3 numerical_jacobian(const DiffeoMap& map, const Vec3& p, double h) {
  if (h <= 0.0) throw std::invalid_argument("numerical_jacobian: h must be > 0");
  Mat3 jac;
  for (int i = 0; i < 3; ++i) {
    Vec3 dp = Vec3::Zero();
    dp(i) = h;
    jac.col(i) = (map_position(map, p + dp) - map_position(map, p - dp)) /
                 (2.0 * h);
  }
  return jac;
}

double spectral_norm(const Mat3& m) {
  const Eigen::JacobiSVD<Mat3> svd(m);
  return svd.singularValues()(0);
}

}  // namespace diffeo
