#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "diffeo/evaluation.hpp"
#include "diffeo/keypoints.hpp"
#include "diffeo/mapping.hpp"
#include "diffeo/replication.hpp"
#include "diffeo/scenario.hpp"

namespace diffeo {

/// File access or parse failure (missing file, malformed JSON/CSV,
/// unwritable path).
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Maps. Doubles round-trip exactly; serializing the same map twice yields
// byte-identical documents.
nlohmann::json map_to_json(const DiffeoMap& map);
DiffeoMap map_from_json(const nlohmann::json& j);
void save_map(const DiffeoMap& map, const std::filesystem::path& path);
DiffeoMap load_map(const std::filesystem::path& path);

// Workspaces. Loading expands an optional sub_keypoints directive
// ({"per_axis": 3, "spacing": 0.05}) into the full grid.
nlohmann::json workspace_to_json(const KeyPointSet& set);
KeyPointSet workspace_from_json(const nlohmann::json& j);
void save_workspace(const KeyPointSet& set, const std::filesystem::path& path);
KeyPointSet load_workspace(const std::filesystem::path& path);

// Trajectories: CSV with columns t,px,py,pz,qw,qx,qy,qz.
void save_trajectory_csv(const Trajectory& traj,
                         const std::filesystem::path& path);
Trajectory load_trajectory_csv(const std::filesystem::path& path);

// Velocity log: CSV with columns t,speed_norm.
void save_velocity_log_csv(const std::vector<VelocityRecord>& log,
                           const std::filesystem::path& path);

nlohmann::json evaluation_report_to_json(const EvaluationReport& report);
nlohmann::json batch_report_to_json(const std::vector<MethodBatch>& batches);
/// CSV rows env_id,method,max_gradient,final_error,iterations,converged.
void save_batch_csv(const std::vector<MethodBatch>& batches,
                    const std::filesystem::path& path);

// Scenario directory: scenario.json plus env_NNN/{primary,replica}.json.
// The first environment is mirrored at the top level as primary.json /
// replica.json, and the primary trajectory (when present) as
// trajectory.csv.
void save_scenario(const Scenario& scenario,
                   const std::filesystem::path& dir);
Scenario load_scenario(const std::filesystem::path& dir);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const nlohmann::json& j,
                     const std::filesystem::path& path);

}  // namespace diffeo
