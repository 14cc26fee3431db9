// Command-line front end: fitting, evaluation, point mapping, replication
// simulation, scenario generation and batch runs.
//
// Exit codes: 0 success, 1 usage error, 2 fit did not converge (the map is
// still written), 3 I/O error.

#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "diffeo/evaluation.hpp"
#include "diffeo/fitting.hpp"
#include "diffeo/log.hpp"
#include "diffeo/mapping.hpp"
#include "diffeo/replication.hpp"
#include "diffeo/scenario.hpp"
#include "diffeo/serialization.hpp"

namespace {

using namespace diffeo;

struct FitArgs {
  std::string method = "tadiff";
  std::string primary;
  std::string replica;
  std::string out;
  FitConfig cfg;
};

struct EvalArgs {
  std::string map;
  std::string primary;
  std::string replica;
  std::string report;
  std::string csv;
  double grid_spacing = 0.02;
};

struct MapPointArgs {
  std::string map;
  std::vector<double> position;
  std::vector<double> orientation{1.0, 0.0, 0.0, 0.0};
};

struct SimulateArgs {
  std::string map;
  std::string trajectory;
  std::string mode = "point";
  std::string out;
  std::string velocity_log;
  double dt = 0.002;
  double kp = 2.0;
};

struct ScenarioArgs {
  std::string kind;
  std::string out;
  int n = 100;
  std::uint64_t seed = 0;
  std::vector<double> angles_deg{0.0, 45.0, 90.0};
};

struct BatchArgs {
  std::string scenario;
  std::vector<std::string> methods{"diff", "rdiff", "tadiff"};
  std::string report;
  std::string csv;
  int parallel = 1;
  FitConfig cfg;
};

DiffeoMap run_fit_method(const std::string& method, const KeyPointSet& inits,
                         const KeyPointSet& goals, const FitConfig& cfg) {
  switch (method_from_name(method)) {
    case Method::Diff:
      return fit_diff(inits, goals, cfg);
    case Method::RDiff:
      return fit_rdiff(inits, goals, cfg);
    case Method::TaDiff:
      return fit_tadiff(inits, goals, cfg);
  }
  throw std::invalid_argument("unknown method " + method);
}

int cmd_fit(const FitArgs& args) {
  const KeyPointSet inits = load_workspace(args.primary);
  const KeyPointSet goals = load_workspace(args.replica);
  const DiffeoMap map = run_fit_method(args.method, inits, goals, args.cfg);
  save_map(map, args.out);
  std::cout << "fit " << args.method << ": iterations "
            << map.diagnostics.iterations << ", position cost "
            << map.diagnostics.final_position_cost << " m, converged "
            << (map.diagnostics.converged ? "yes" : "no") << "\n";
  if (!map.diagnostics.converged) {
    log_error("fit did not converge; map written to " + args.out);
    return 2;
  }
  return 0;
}

int cmd_eval(const EvalArgs& args) {
  const DiffeoMap map = load_map(args.map);
  KeyPointSet inits = map.fit_inits;
  KeyPointSet goals = map.fit_goals;
  if (!args.primary.empty()) inits = load_workspace(args.primary);
  if (!args.replica.empty()) goals = load_workspace(args.replica);
  if (inits.points.empty() || goals.points.empty()) {
    throw std::invalid_argument(
        "map carries no fit key points; pass --primary and --replica");
  }
  const auto grid =
      GradientGridSpec::for_keypoints(inits, 0.05, args.grid_spacing);
  const EvaluationReport report = evaluate_map(map, inits, goals, grid);
  write_json_file(evaluation_report_to_json(report), args.report);
  std::cout << "eval: mean error " << report.mean_keypoint_error
            << " m, max gradient " << report.max_gradient << ", min det "
            << report.min_jacobian_det << "\n";
  return 0;
}

int cmd_map_point(const MapPointArgs& args) {
  const DiffeoMap map = load_map(args.map);
  if (args.position.size() != 3) {
    throw std::invalid_argument("--position needs x,y,z");
  }
  if (args.orientation.size() != 4) {
    throw std::invalid_argument("--orientation needs w,x,y,z");
  }
  const Vec3 p(args.position[0], args.position[1], args.position[2]);
  const Quat q = Quat(args.orientation[0], args.orientation[1],
                      args.orientation[2], args.orientation[3])
                     .normalized();
  const auto [mp, mq] = map_pose(map, p, q);
  const nlohmann::json out = {
      {"position", {mp.x(), mp.y(), mp.z()}},
      {"orientation", {mq.w(), mq.x(), mq.y(), mq.z()}},
  };
  std::cout << out.dump() << "\n";
  return 0;
}

int cmd_simulate(const SimulateArgs& args) {
  const DiffeoMap map = load_map(args.map);
  const Trajectory primary = load_trajectory_csv(args.trajectory);

  const Pose first = primary.samples.front().pose;
  Pose start;
  start.position = map_position(map, first.position);
  start.orientation = map_orientation(map, first.position, first.orientation);

  FollowerState follower = FollowerState::point(start);
  if (args.mode == "chain") {
    follower = FollowerState::chain_at(SerialChain::six_axis(),
                                       {0.3, -0.6, 0.9, 0.2, 0.4, 0.1});
  } else if (args.mode != "point") {
    throw std::invalid_argument("--mode must be point or chain");
  }

  ReplicationOptions opts;
  opts.dt = args.dt;
  opts.kp = args.kp;
  const ReplicationResult result =
      simulate_replication(map, primary, follower, opts);
  save_trajectory_csv(result.follower, args.out);
  const std::string vel_path = args.velocity_log.empty()
                                   ? args.out + ".vel.csv"
                                   : args.velocity_log;
  save_velocity_log_csv(result.velocity_log, vel_path);
  std::cout << "simulate: " << result.follower.samples.size()
            << " samples written to " << args.out << ", velocity log "
            << vel_path << "\n";
  return 0;
}

int cmd_scenario(const ScenarioArgs& args) {
  Scenario scenario;
  if (args.kind == "sim1") {
    Sim1Config cfg;
    cfg.rotation_angles_rad.clear();
    for (double deg : args.angles_deg) {
      cfg.rotation_angles_rad.push_back(deg * std::numbers::pi / 180.0);
    }
    scenario = generate_sim1(cfg);
  } else if (args.kind == "sim2") {
    scenario = generate_sim2(args.n, args.seed);
  } else if (args.kind == "exp1") {
    scenario = builtin_exp1();
  } else {
    throw std::invalid_argument("scenario kind must be sim1, sim2 or exp1");
  }
  save_scenario(scenario, args.out);
  std::cout << "scenario " << scenario.name << ": "
            << scenario.environments.size() << " environment(s) written to "
            << args.out << "\n";
  return 0;
}

int cmd_batch(const BatchArgs& args) {
  const Scenario scenario = load_scenario(args.scenario);
  std::vector<Method> methods;
  for (const auto& name : args.methods) {
    methods.push_back(method_from_name(name));
  }
  const int threads =
      args.parallel > 0
          ? args.parallel
          : std::max(1u, std::thread::hardware_concurrency());
  const std::vector<MethodBatch> batches =
      run_batch(scenario.environments, methods, args.cfg, threads);
  if (!args.report.empty()) {
    write_json_file(batch_report_to_json(batches), args.report);
  }
  if (!args.csv.empty()) save_batch_csv(batches, args.csv);
  for (const auto& batch : batches) {
    std::cout << method_name(batch.method) << ": success rate "
              << batch.summary.success_rate * 100.0 << " %, max error "
              << batch.summary.max_positional_error << " m, mean iterations "
              << batch.summary.mean_iterations << ", median max gradient "
              << batch.summary.gradient_distribution.median << "\n";
  }
  return 0;
}

void add_fit_options(CLI::App* cmd, FitConfig& cfg) {
  cmd->add_option("--threshold", cfg.position_threshold,
                  "position stop threshold [m]");
  cmd->add_option("--orientation-threshold", cfg.orientation_threshold,
                  "orientation stop threshold [rad]");
  cmd->add_option("--jmax", cfg.j_max, "max composition steps");
  cmd->add_option("--seed", cfg.seed, "restart perturbation seed");
  cmd->add_option("--rho-sig", cfg.rho_sig, "twist sigmoid slope [1/m]");
  cmd->add_option("--ta-restarts", cfg.ta_restarts,
                  "multi-start count per discrete combo");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"diffeo: diffeomorphic workspace mapping toolkit"};
  app.require_subcommand(1);

  FitArgs fit_args;
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit a map to key points");
  fit_cmd->add_option("--method", fit_args.method, "diff, rdiff or tadiff")
      ->check(CLI::IsMember({"diff", "rdiff", "tadiff"}));
  fit_cmd->add_option("--primary", fit_args.primary, "init workspace JSON")
      ->required();
  fit_cmd->add_option("--replica", fit_args.replica, "goal workspace JSON")
      ->required();
  fit_cmd->add_option("--out", fit_args.out, "output map JSON")->required();
  add_fit_options(fit_cmd, fit_args.cfg);

  EvalArgs eval_args;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a fitted map");
  eval_cmd->add_option("--map", eval_args.map, "map JSON")->required();
  eval_cmd->add_option("--primary", eval_args.primary,
                       "init workspace JSON (default: embedded)");
  eval_cmd->add_option("--replica", eval_args.replica,
                       "goal workspace JSON (default: embedded)");
  eval_cmd->add_option("--grid-spacing", eval_args.grid_spacing,
                       "gradient grid spacing [m]");
  eval_cmd->add_option("--report", eval_args.report, "report JSON")
      ->required();

  MapPointArgs mp_args;
  CLI::App* mp_cmd = app.add_subcommand("map-point", "map a single pose");
  mp_cmd->add_option("--map", mp_args.map, "map JSON")->required();
  mp_cmd->add_option("--position", mp_args.position, "x,y,z [m]")
      ->required()
      ->delimiter(',');
  mp_cmd->add_option("--orientation", mp_args.orientation, "w,x,y,z")
      ->delimiter(',');

  SimulateArgs sim_args;
  CLI::App* sim_cmd =
      app.add_subcommand("simulate", "replicate a trajectory through a map");
  sim_cmd->add_option("--map", sim_args.map, "map JSON")->required();
  sim_cmd->add_option("--trajectory", sim_args.trajectory,
                      "primary trajectory CSV")
      ->required();
  sim_cmd->add_option("--mode", sim_args.mode, "point or chain")
      ->check(CLI::IsMember({"point", "chain"}));
  sim_cmd->add_option("--dt", sim_args.dt, "controller period [s]");
  sim_cmd->add_option("--kp", sim_args.kp, "proportional gain");
  sim_cmd->add_option("--out", sim_args.out, "follower trajectory CSV")
      ->required();
  sim_cmd->add_option("--velocity-log", sim_args.velocity_log,
                      "velocity log CSV (default: <out>.vel.csv)");

  ScenarioArgs scen_args;
  CLI::App* scen_cmd =
      app.add_subcommand("scenario", "generate a benchmark scenario");
  scen_cmd->add_option("kind", scen_args.kind, "sim1, sim2 or exp1")
      ->required();
  scen_cmd->add_option("--n", scen_args.n, "environment count (sim2)");
  scen_cmd->add_option("--seed", scen_args.seed, "generator seed");
  scen_cmd->add_option("--angles", scen_args.angles_deg,
                       "goal plane rotations in degrees (sim1)")
      ->delimiter(',');
  scen_cmd->add_option("--out", scen_args.out, "output directory")
      ->required();

  BatchArgs batch_args;
  CLI::App* batch_cmd =
      app.add_subcommand("batch", "fit and evaluate a whole scenario");
  batch_cmd->add_option("--scenario", batch_args.scenario,
                        "scenario directory")
      ->required();
  batch_cmd->add_option("--methods", batch_args.methods,
                        "comma separated subset of diff,rdiff,tadiff")
      ->delimiter(',');
  batch_cmd->add_option("--report", batch_args.report, "report JSON");
  batch_cmd->add_option("--csv", batch_args.csv, "per-environment CSV");
  batch_cmd->add_option("--parallel", batch_args.parallel,
                        "worker threads (0 = hardware)");
  add_fit_options(batch_cmd, batch_args.cfg);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (fit_cmd->parsed()) return cmd_fit(fit_args);
    if (eval_cmd->parsed()) return cmd_eval(eval_args);
    if (mp_cmd->parsed()) return cmd_map_point(mp_args);
    if (sim_cmd->parsed()) return cmd_simulate(sim_args);
    if (scen_cmd->parsed()) return cmd_scenario(scen_args);
    if (batch_cmd->parsed()) return cmd_batch(batch_args);
  } catch (const IoError& e) {
    log_error(e.what());
    return 3;
  } catch (const std::exception& e) {
    log_error(e.what());
    return 1;
  }
  return 1;
}
