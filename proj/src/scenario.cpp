#include "diffeo/scenario.hpp"

#include <cmath>
#include <stdexcept>

#include "diffeo/rng.hpp"

namespace diffeo {

KeyPointSet expand_sub_keypoints(const KeyPointSet& base, int per_axis,
                                 double spacing) {
  if (per_axis < 1 || spacing <= 0.0) {
    throw std::invalid_argument("expand_sub_keypoints: bad grid parameters");
  }
  KeyPointSet out;
  out.name = base.name;
  const double half = (per_axis - 1) / 2.0;
  for (const auto& kp : base.points) {
    int index = 0;
    for (int ix = 0; ix < per_axis; ++ix) {
      for (int iy = 0; iy < per_axis; ++iy) {
        for (int iz = 0; iz < per_axis; ++iz) {
          const Vec3 offset((ix - half) * spacing, (iy - half) * spacing,
                            (iz - half) * spacing);
          KeyPoint sub;
          sub.id = kp.id + "_s" + std::to_string(index++);
          sub.position = kp.position + offset;
          sub.orientation = Quat::Identity();
          out.points.push_back(sub);
        }
      }
    }
  }
  return out;
}

Scenario generate_sim1(const Sim1Config& cfg) {
  KeyPointSet targets;
  targets.name = "sim1_primary";
  const double h = cfg.plane_half_size;
  const std::vector<Vec3> corners = {
      {-h, -h, 0.0}, {h, -h, 0.0}, {h, h, 0.0}, {-h, h, 0.0}};
  for (std::size_t i = 0; i < corners.size(); ++i) {
    KeyPoint kp;
    kp.id = "t" + std::to_string(i + 1);
    kp.position = cfg.plane_center + corners[i];
    targets.points.push_back(kp);
  }
  const KeyPointSet inits =
      expand_sub_keypoints(targets, cfg.sub_per_axis, cfg.sub_spacing);

  Scenario scenario;
  scenario.name = "sim1";
  scenario.generation = {
      {"plane_center",
       {cfg.plane_center.x(), cfg.plane_center.y(), cfg.plane_center.z()}},
      {"plane_half_size", cfg.plane_half_size},
      {"sub_spacing", cfg.sub_spacing},
      {"sub_per_axis", cfg.sub_per_axis},
      {"rotation_angles_rad", cfg.rotation_angles_rad},
      {"translation",
       {cfg.translation.x(), cfg.translation.y(), cfg.translation.z()}},
  };
  for (double angle : cfg.rotation_angles_rad) {
    Environment env;
    env.inits = inits;
    env.inits.name = "sim1_primary";
    env.goals.name = "sim1_replica";
    const Mat3 rot = rot_yaw(angle);
    for (const auto& kp : inits.points) {
      KeyPoint goal = kp;
      goal.position = rot * (kp.position - cfg.plane_center) +
                      cfg.plane_center + cfg.translation;
      env.goals.points.push_back(goal);
    }
    scenario.environments.push_back(std::move(env));
  }
  return scenario;
}

Scenario generate_sim2(int n, std::uint64_t seed) {
  if (n < 1) {
    throw std::invalid_argument("generate_sim2: n must be >= 1");
  }
  constexpr double kLo = 0.1;
  constexpr double kHi = 0.6;
  Scenario scenario;
  scenario.name = "sim2";
  scenario.seed = seed;
  scenario.generation = {{"n", n}, {"seed", seed}, {"range", {kLo, kHi}}};
  Rng rng(seed);
  const auto draw_set = [&rng](const std::string& name) {
    KeyPointSet set;
    set.name = name;
    for (int k = 1; k <= 4; ++k) {
      KeyPoint kp;
      kp.id = "t" + std::to_string(k);
      kp.position = Vec3(rng.uniform(kLo, kHi), rng.uniform(kLo, kHi),
                         rng.uniform(kLo, kHi));
      set.points.push_back(kp);
    }
    return set;
  };
  for (int env_idx = 0; env_idx < n; ++env_idx) {
    Environment env;
    env.inits = draw_set("sim2_primary");
    env.goals = draw_set("sim2_replica");
    scenario.environments.push_back(std::move(env));
  }
  return scenario;
}

Scenario builtin_exp1() {
  const std::vector<Vec3> left = {
      {0.79, 0.48, 1.02},
      {0.55, 0.16, 1.22},
      {0.45, 0.41, 1.26},
      {0.68, 0.24, 1.02},
  };
  const std::vector<Vec3> right = {
      {0.50, 0.20, 1.20},
      {0.70, 0.20, 1.20},
      {0.70, 0.40, 1.20},
      {0.50, 0.40, 1.20},
  };
  Environment env;
  env.inits.name = "exp1_primary";
  env.goals.name = "exp1_replica";
  for (std::size_t i = 0; i < left.size(); ++i) {
    KeyPoint kp;
    kp.id = "target" + std::to_string(i + 1);
    kp.position = left[i];
    env.inits.points.push_back(kp);
    kp.position = right[i];
    env.goals.points.push_back(kp);
  }

  Scenario scenario;
  scenario.name = "exp1";
  scenario.generation = {{"trajectory_order", {1, 2, 3, 4, 1, 3, 2, 4}},
                         {"trajectory_speed", 0.1},
                         {"trajectory_hold", 0.5}};
  scenario.environments.push_back(env);
  scenario.trajectory =
      waypoint_trajectory(left, {0, 1, 2, 3, 0, 2, 1, 3}, 0.1, 0.5);
  return scenario;
}

}  // namespace diffeo
