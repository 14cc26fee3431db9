#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffeo/keypoints.hpp"
#include "diffeo/replication.hpp"

namespace diffeo {

/// A named, seeded family of paired workspaces.
struct Scenario {
  std::string name;
  std::uint64_t seed = 0;
  std::vector<Environment> environments;
  std::optional<Trajectory> trajectory;  // primary replay, when defined
  nlohmann::json generation;             // parameters the scenario was built from
};

/// Replaces each base key point with a per_axis^3 grid of sub-key points
/// spaced `spacing` apart and centered on it (the center cell keeps the
/// base position). Ids become "<base>_sNN"; orientations are identity.
KeyPointSet expand_sub_keypoints(const KeyPointSet& base, int per_axis,
                                 double spacing);

struct Sim1Config {
  // Four targets on the corners of a horizontal square.
  Vec3 plane_center{0.35, 0.35, 0.35};
  double plane_half_size = 0.15;  // [m]
  double sub_spacing = 0.05;      // [m]
  int sub_per_axis = 3;
  // One environment per angle: goals are the inits rotated about the
  // vertical axis through the plane centroid, then translated.
  std::vector<double> rotation_angles_rad{0.0, std::numbers::pi / 4,
                                          std::numbers::pi / 2};
  Vec3 translation{0.0, 0.0, 0.0};
};

/// Rotated-workspace family with dense sub-key points around each target.
Scenario generate_sim1(const Sim1Config& cfg = {});

/// n environments of 4 init and 4 goal positions drawn uniformly i.i.d.
/// from [0.1, 0.6]^3 with identity orientations.
Scenario generate_sim2(int n, std::uint64_t seed);

/// The built-in dual-arm benchmark: preset left-arm targets as inits,
/// right-arm targets as goals, and the primary visiting trajectory
/// 1,2,3,4,1,3,2,4.
Scenario builtin_exp1();

}  // namespace diffeo
