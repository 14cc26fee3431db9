#include "diffeo/serialization.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace diffeo {
namespace {

nlohmann::json vec3_to_json(const Vec3& v) {
  return nlohmann::json::array({v.x(), v.y(), v.z()});
}

Vec3 vec3_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) {
    throw IoError("expected a 3-element array");
  }
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

nlohmann::json quat_to_json(const Quat& q) {
  return nlohmann::json::array({q.w(), q.x(), q.y(), q.z()});
}

Quat quat_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 4) {
    throw IoError("expected a 4-element quaternion array [w,x,y,z]");
  }
  return Quat(j[0].get<double>(), j[1].get<double>(), j[2].get<double>(),
              j[3].get<double>());
}

nlohmann::json ta_params_to_json(const TwistedAffineParams& p) {
  return {
      {"scaling", vec3_to_json(p.scaling)},
      {"shear", vec3_to_json(p.shear)},
      {"rotation", vec3_to_json(p.rotation)},
      {"reflection", vec3_to_json(p.reflection)},
      {"twist_amplitudes", {p.twist_roll, p.twist_pitch}},
      {"rho_sig", p.rho_sig},
      {"translation", vec3_to_json(p.translation)},
      {"mu_init", vec3_to_json(p.mu_init)},
      {"mu_goal", vec3_to_json(p.mu_goal)},
  };
}

TwistedAffineParams ta_params_from_json(const nlohmann::json& j) {
  TwistedAffineParams p;
  p.scaling = vec3_from_json(j.at("scaling"));
  p.shear = vec3_from_json(j.at("shear"));
  p.rotation = vec3_from_json(j.at("rotation"));
  p.reflection = vec3_from_json(j.at("reflection"));
  p.twist_roll = j.at("twist_amplitudes").at(0).get<double>();
  p.twist_pitch = j.at("twist_amplitudes").at(1).get<double>();
  p.rho_sig = j.at("rho_sig").get<double>();
  p.translation = vec3_from_json(j.at("translation"));
  p.mu_init = vec3_from_json(j.at("mu_init"));
  p.mu_goal = vec3_from_json(j.at("mu_goal"));
  return p;
}

std::string step_kind_name(StepKind kind) {
  switch (kind) {
    case StepKind::Translation:
      return "translation";
    case StepKind::Spin:
      return "spin";
    case StepKind::Orbital:
      return "orbital";
  }
  return "translation";
}

StepKind step_kind_from_name(const std::string& name) {
  if (name == "translation") return StepKind::Translation;
  if (name == "spin") return StepKind::Spin;
  if (name == "orbital") return StepKind::Orbital;
  throw IoError("unknown step kind '" + name + "'");
}

nlohmann::json step_to_json(const CompositionStep& step) {
  nlohmann::json j = {
      {"kind", step_kind_name(step.kind)},
      {"rho", step.rho},
      {"center", vec3_to_json(step.center)},
  };
  if (step.kind == StepKind::Translation) {
    j["v"] = vec3_to_json(step.v_translation);
  } else {
    j["v"] = quat_to_json(step.v_rotation);
  }
  return j;
}

CompositionStep step_from_json(const nlohmann::json& j) {
  CompositionStep step;
  step.kind = step_kind_from_name(j.at("kind").get<std::string>());
  step.rho = j.at("rho").get<double>();
  step.center = vec3_from_json(j.at("center"));
  if (step.kind == StepKind::Translation) {
    step.v_translation = vec3_from_json(j.at("v"));
  } else {
    step.v_rotation = quat_from_json(j.at("v"));
  }
  return step;
}

void format_double(std::string& out, double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  out += buf;
}

std::vector<double> parse_csv_row(const std::string& line,
                                  std::size_t expected,
                                  const std::string& context) {
  std::vector<double> values;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      values.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw IoError(context + ": malformed value '" + cell + "'");
    }
  }
  if (values.size() != expected) {
    throw IoError(context + ": expected " + std::to_string(expected) +
                  " columns, got " + std::to_string(values.size()));
  }
  return values;
}

void write_text_file(const std::string& text,
                     const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

nlohmann::json map_to_json(const DiffeoMap& map) {
  nlohmann::json steps_pos = nlohmann::json::array();
  for (const auto& s : map.position_steps) steps_pos.push_back(step_to_json(s));
  nlohmann::json steps_ori = nlohmann::json::array();
  for (const auto& s : map.orientation_steps) {
    steps_ori.push_back(step_to_json(s));
  }
  nlohmann::json costs = nlohmann::json::array();
  for (const auto& c : map.diagnostics.per_iteration_costs) {
    costs.push_back({c[0], c[1]});
  }
  nlohmann::json j = {
      {"method", method_name(map.method)},
      {"orbital_about_center", map.orbital_about_center},
      {"position_steps", steps_pos},
      {"orientation_steps", steps_ori},
      {"metadata",
       {
           {"iterations", map.diagnostics.iterations},
           {"final_position_cost", map.diagnostics.final_position_cost},
           {"final_orientation_cost", map.diagnostics.final_orientation_cost},
           {"converged", map.diagnostics.converged},
           {"ta_residual", map.diagnostics.ta_residual},
           {"per_iteration_costs", costs},
           {"keypoints",
            {
                {"inits", workspace_to_json(map.fit_inits)},
                {"goals", workspace_to_json(map.fit_goals)},
            }},
       }},
  };
  if (map.ta_prefix) j["ta_prefix"] = ta_params_to_json(*map.ta_prefix);
  return j;
}

DiffeoMap map_from_json(const nlohmann::json& j) {
  try {
    DiffeoMap map;
    map.method = method_from_name(j.at("method").get<std::string>());
    map.orbital_about_center = j.value("orbital_about_center", false);
    if (j.contains("ta_prefix")) {
      map.ta_prefix = ta_params_from_json(j.at("ta_prefix"));
    }
    for (const auto& s : j.at("position_steps")) {
      map.position_steps.push_back(step_from_json(s));
    }
    for (const auto& s : j.at("orientation_steps")) {
      map.orientation_steps.push_back(step_from_json(s));
    }
    const auto& meta = j.at("metadata");
    map.diagnostics.iterations = meta.at("iterations").get<int>();
    map.diagnostics.final_position_cost =
        meta.at("final_position_cost").get<double>();
    map.diagnostics.final_orientation_cost =
        meta.at("final_orientation_cost").get<double>();
    map.diagnostics.converged = meta.at("converged").get<bool>();
    map.diagnostics.ta_residual = meta.value("ta_residual", 0.0);
    for (const auto& c : meta.at("per_iteration_costs")) {
      map.diagnostics.per_iteration_costs.push_back(
          {c.at(0).get<double>(), c.at(1).get<double>()});
    }
    if (meta.contains("keypoints")) {
      map.fit_inits = workspace_from_json(meta.at("keypoints").at("inits"));
      map.fit_goals = workspace_from_json(meta.at("keypoints").at("goals"));
    }
    return map;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed map document: ") + e.what());
  }
}

void save_map(const DiffeoMap& map, const std::filesystem::path& path) {
  write_json_file(map_to_json(map), path);
}

DiffeoMap load_map(const std::filesystem::path& path) {
  return map_from_json(read_json_file(path));
}

nlohmann::json workspace_to_json(const KeyPointSet& set) {
  nlohmann::json points = nlohmann::json::array();
  for (const auto& kp : set.points) {
    points.push_back({
        {"id", kp.id},
        {"position", vec3_to_json(kp.position)},
        {"orientation", quat_to_json(kp.orientation)},
    });
  }
  return {{"name", set.name}, {"keypoints", points}};
}

KeyPointSet workspace_from_json(const nlohmann::json& j) {
  try {
    KeyPointSet set;
    set.name = j.value("name", "");
    for (const auto& p : j.at("keypoints")) {
      KeyPoint kp;
      kp.id = p.at("id").is_string() ? p.at("id").get<std::string>()
                                     : p.at("id").dump();
      kp.position = vec3_from_json(p.at("position"));
      if (p.contains("orientation")) {
        kp.orientation = quat_from_json(p.at("orientation"));
        const double norm = kp.orientation.norm();
        if (!std::isfinite(norm) || norm < 1e-9) {
          throw IoError("key point '" + kp.id + "' has a degenerate quaternion");
        }
        // Keep the stored bits when already unit norm so round trips are
        // byte faithful.
        if (std::abs(norm - 1.0) > 1e-9) kp.orientation.normalize();
      }
      set.points.push_back(kp);
    }
    if (j.contains("sub_keypoints")) {
      const auto& sub = j.at("sub_keypoints");
      set = expand_sub_keypoints(set, sub.value("per_axis", 3),
                                 sub.value("spacing", 0.05));
      set.name = j.value("name", "");
    }
    set.validate();
    return set;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed workspace document: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw IoError(std::string("invalid workspace: ") + e.what());
  }
}

void save_workspace(const KeyPointSet& set,
                    const std::filesystem::path& path) {
  write_json_file(workspace_to_json(set), path);
}

KeyPointSet load_workspace(const std::filesystem::path& path) {
  return workspace_from_json(read_json_file(path));
}

void save_trajectory_csv(const Trajectory& traj,
                         const std::filesystem::path& path) {
  std::string out = "t,px,py,pz,qw,qx,qy,qz\n";
  for (const auto& s : traj.samples) {
    format_double(out, s.t);
    for (double v : {s.pose.position.x(), s.pose.position.y(),
                     s.pose.position.z(), s.pose.orientation.w(),
                     s.pose.orientation.x(), s.pose.orientation.y(),
                     s.pose.orientation.z()}) {
      out += ',';
      format_double(out, v);
    }
    out += '\n';
  }
  write_text_file(out, path);
}

Trajectory load_trajectory_csv(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  std::stringstream ss(text);
  std::string line;
  Trajectory traj;
  bool first = true;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("t,", 0) == 0) continue;  // header
    }
    const auto v = parse_csv_row(line, 8, "trajectory '" + path.string() + "'");
    TrajectorySample sample;
    sample.t = v[0];
    sample.pose.position = Vec3(v[1], v[2], v[3]);
    sample.pose.orientation = Quat(v[4], v[5], v[6], v[7]).normalized();
    traj.samples.push_back(sample);
  }
  try {
    traj.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError("trajectory '" + path.string() + "': " + e.what());
  }
  return traj;
}

void save_velocity_log_csv(const std::vector<VelocityRecord>& log,
                           const std::filesystem::path& path) {
  std::string out = "t,speed_norm\n";
  for (const auto& rec : log) {
    format_double(out, rec.t);
    out += ',';
    format_double(out, rec.speed);
    out += '\n';
  }
  write_text_file(out, path);
}

nlohmann::json evaluation_report_to_json(const EvaluationReport& report) {
  return {
      {"method", report.method},
      {"mean_keypoint_error", report.mean_keypoint_error},
      {"max_keypoint_error", report.max_keypoint_error},
      {"max_gradient", report.max_gradient},
      {"min_jacobian_det", report.min_jacobian_det},
      {"rbf_iterations", report.rbf_iterations},
      {"converged", report.converged},
      {"wall_time_s", report.wall_time_s},
  };
}

namespace {

nlohmann::json box_stats_to_json(const BoxStats& stats) {
  return {
      {"q1", stats.q1},
      {"median", stats.median},
      {"q3", stats.q3},
      {"whisker_low", stats.whisker_low},
      {"whisker_high", stats.whisker_high},
      {"outliers", stats.outliers},
  };
}

}  // namespace

nlohmann::json batch_report_to_json(const std::vector<MethodBatch>& batches) {
  nlohmann::json methods = nlohmann::json::array();
  for (const auto& batch : batches) {
    nlohmann::json envs = nlohmann::json::array();
    for (const auto& env : batch.environments) {
      nlohmann::json e = {{"env", env.env_index}, {"fit_ok", env.fit_ok}};
      if (env.fit_ok) {
        e.update(evaluation_report_to_json(env.report));
      } else {
        e["error"] = env.error;
      }
      envs.push_back(e);
    }
    methods.push_back({
        {"method", method_name(batch.method)},
        {"summary",
         {
             {"n_environments", batch.summary.n_environments},
             {"success_rate", batch.summary.success_rate},
             {"max_positional_error", batch.summary.max_positional_error},
             {"mean_iterations", batch.summary.mean_iterations},
             {"gradient_distribution",
              box_stats_to_json(batch.summary.gradient_distribution)},
         }},
        {"per_environment", envs},
    });
  }
  return {{"methods", methods}};
}

void save_batch_csv(const std::vector<MethodBatch>& batches,
                    const std::filesystem::path& path) {
  std::string out = "env_id,method,max_gradient,final_error,iterations,converged\n";
  for (const auto& batch : batches) {
    for (const auto& env : batch.environments) {
      if (!env.fit_ok) continue;
      out += std::to_string(env.env_index);
      out += ',';
      out += method_name(batch.method);
      out += ',';
      format_double(out, env.report.max_gradient);
      out += ',';
      format_double(out, env.report.mean_keypoint_error);
      out += ',';
      out += std::to_string(env.report.rbf_iterations);
      out += ',';
      out += env.report.converged ? "1" : "0";
      out += '\n';
    }
  }
  write_text_file(out, path);
}

void save_scenario(const Scenario& scenario,
                   const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory '" + dir.string() + "'");

  nlohmann::json envs = nlohmann::json::array();
  for (std::size_t i = 0; i < scenario.environments.size(); ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "env_%03zu", i);
    const std::filesystem::path env_dir = dir / name;
    std::filesystem::create_directories(env_dir, ec);
    if (ec) throw IoError("cannot create directory '" + env_dir.string() + "'");
    save_workspace(scenario.environments[i].inits, env_dir / "primary.json");
    save_workspace(scenario.environments[i].goals, env_dir / "replica.json");
    envs.push_back(name);
  }
  // First environment mirrored at the top level for single-pair workflows.
  if (!scenario.environments.empty()) {
    save_workspace(scenario.environments.front().inits, dir / "primary.json");
    save_workspace(scenario.environments.front().goals, dir / "replica.json");
  }
  nlohmann::json j = {
      {"name", scenario.name},
      {"seed", scenario.seed},
      {"n_environments", scenario.environments.size()},
      {"environments", envs},
      {"generation", scenario.generation},
  };
  if (scenario.trajectory) {
    save_trajectory_csv(*scenario.trajectory, dir / "trajectory.csv");
    j["trajectory"] = "trajectory.csv";
  }
  write_json_file(j, dir / "scenario.json");
}

Scenario load_scenario(const std::filesystem::path& dir) {
  const nlohmann::json j = read_json_file(dir / "scenario.json");
  try {
    Scenario scenario;
    scenario.name = j.value("name", "");
    scenario.seed = j.value("seed", std::uint64_t{0});
    scenario.generation = j.value("generation", nlohmann::json::object());
    for (const auto& env_name : j.at("environments")) {
      const std::filesystem::path env_dir =
          dir / env_name.get<std::string>();
      Environment env;
      env.inits = load_workspace(env_dir / "primary.json");
      env.goals = load_workspace(env_dir / "replica.json");
      scenario.environments.push_back(std::move(env));
    }
    if (j.contains("trajectory")) {
      scenario.trajectory =
          load_trajectory_csv(dir / j.at("trajectory").get<std::string>());
    }
    return scenario;
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("malformed scenario document: ") + e.what());
  }
}

nlohmann::json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed JSON in '" + path.string() + "': " + e.what());
  }
}

void write_json_file(const nlohmann::json& j,
                     const std::filesystem::path& path) {
  write_text_file(j.dump(2) + "\n", path);
}

}  // namespace diffeo
