#pragma once

#include <array>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "diffeo/geometry.hpp"
#include "diffeo/keypoints.hpp"

namespace diffeo {

enum class StepKind { Translation, Spin, Orbital };

/// One RBF-weighted composition step. Translation steps carry
/// v_translation; Spin and Orbital steps carry v_rotation.
struct CompositionStep {
  StepKind kind = StepKind::Translation;
  double rho = 0.0;  // RBF slope [1/m]
  Vec3 center = Vec3::Zero();
  Vec3 v_translation = Vec3::Zero();
  Quat v_rotation = Quat::Identity();
};

enum class Method { Diff, RDiff, TaDiff };

std::string method_name(Method method);
Method method_from_name(const std::string& name);

struct FitDiagnostics {
  int iterations = 0;
  double final_position_cost = 0.0;     // [m]
  double final_orientation_cost = 0.0;  // [rad], quaternion-log norm
  bool converged = false;
  double ta_residual = 0.0;  // twisted-affine residual before refinement
  // {position, orientation} after each iteration; entry 0 is the pre-fit
  // cost (for TaDiff: the cost after the affine prefix).
  std::vector<std::array<double, 2>> per_iteration_costs;
};

/// A fitted mapping: optional twisted-affine prefix followed by ordered
/// RBF composition steps. Immutable after construction; evaluation is
/// pure and reentrant.
struct DiffeoMap {
  Method method = Method::Diff;
  std::optional<TwistedAffineParams> ta_prefix;
  std::vector<CompositionStep> position_steps;
  std::vector<CompositionStep> orientation_steps;
  // Rotate orbital steps about the step center instead of the coordinate
  // origin. Off by default.
  bool orbital_about_center = false;
  FitDiagnostics diagnostics;
  // Key points the map was fitted on, kept so a map file is
  // self-contained for evaluation.
  KeyPointSet fit_inits;
  KeyPointSet fit_goals;
};

/// Applies a single position step. Translation: p + k_f * v. Orbital:
/// quaternion sandwich of the pure-quaternion form of p by
/// v_rotation^k_f, plus the (normally zero) translation term.
Vec3 apply_position_step(const CompositionStep& step, const Vec3& p,
                         bool orbital_about_center = false);

Vec3 map_position(const DiffeoMap& map, const Vec3& p);

/// Orientation mapping. Step j of the orientation chain evaluates its
/// kernel at the position mapped through position steps 1..j-1, matching
/// the joint per-iteration update of the fitter.
Quat map_orientation(const DiffeoMap& map, const Vec3& p, const Quat& q);

std::pair<Vec3, Quat> map_pose(const DiffeoMap& map, const Vec3& p,
                               const Quat& q);

/// Central-difference Jacobian of map_position.
Mat3 numerical_jacobian(const DiffeoMap& map, const Vec3& p, double h = 1e-4);

/// Largest singular value.
double spectral_norm(const Mat3& m);

}  // namespace diffeo
