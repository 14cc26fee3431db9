#include "diffeo/evaluation.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <thread>

#include "diffeo/log.hpp"

namespace diffeo {

GradientGridSpec GradientGridSpec::for_keypoints(const KeyPointSet& points,
                                                 double inflate,
                                                 double spacing) {
  const auto [lo, hi] = points.bounding_box();
  GradientGridSpec spec;
  spec.lo = lo - Vec3::Constant(inflate);
  spec.hi = hi + Vec3::Constant(inflate);
  spec.spacing = spacing;
  return spec;
}

std::vector<Vec3> GradientGridSpec::points() const {
  if (spacing <= 0.0) {
    throw std::invalid_argument("GradientGridSpec: spacing must be > 0");
  }
  if ((hi - lo).minCoeff() < 0.0) {
    throw std::invalid_argument("GradientGridSpec: degenerate bounds");
  }
  std::array<int, 3> counts;
  for (int axis = 0; axis < 3; ++axis) {
    counts[axis] =
        static_cast<int>(std::floor((hi(axis) - lo(axis)) / spacing + 1e-9)) +
        1;
  }
  std::vector<Vec3> out;
  out.reserve(static_cast<std::size_t>(counts[0]) * counts[1] * counts[2]);
  for (int ix = 0; ix < counts[0]; ++ix) {
    for (int iy = 0; iy < counts[1]; ++iy) {
      for (int iz = 0; iz < counts[2]; ++iz) {
        out.emplace_back(lo.x() + ix * spacing, lo.y() + iy * spacing,
                         lo.z() + iz * spacing);
      }
    }
  }
  return out;
}

EvaluationReport evaluate_map(const DiffeoMap& map, const KeyPointSet& inits,
                              const KeyPointSet& goals,
                              const GradientGridSpec& grid) {
  require_aligned(inits, goals);
  const auto start_time = std::chrono::steady_clock::now();

  EvaluationReport report;
  report.method = method_name(map.method);
  double error_sum = 0.0;
  double error_max = 0.0;
  for (std::size_t k = 0; k < inits.size(); ++k) {
    const double err = (goals.points[k].position -
                        map_position(map, inits.points[k].position))
                           .norm();
    error_sum += err;
    error_max = std::max(error_max, err);
  }
  report.mean_keypoint_error = error_sum / static_cast<double>(inits.size());
  report.max_keypoint_error = error_max;

  double max_gradient = 0.0;
  double min_det = std::numeric_limits<double>::infinity();
  for (const Vec3& point : grid.points()) {
    const Mat3 jac = numerical_jacobian(map, point);
    max_gradient = std::max(max_gradient, spectral_norm(jac));
    min_det = std::min(min_det, jac.determinant());
  }
  report.max_gradient = max_gradient;
  report.min_jacobian_det = min_det;

  report.rbf_iterations = map.diagnostics.iterations;
  report.converged = map.diagnostics.converged;
  report.wall_time_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                    start_time)
          .count();
  return report;
}

EvaluationReport evaluate_map(const DiffeoMap& map, double grid_spacing) {
  return evaluate_map(
      map, map.fit_inits, map.fit_goals,
      GradientGridSpec::for_keypoints(map.fit_inits, 0.05, grid_spacing));
}

BoxStats box_stats(std::vector<double> values) {
  BoxStats stats;
  if (values.empty()) return stats;
  std::sort(values.begin(), values.end());
  const auto quantile = [&](double q) {
    const double h = q * static_cast<double>(values.size() - 1);
    const std::size_t idx = static_cast<std::size_t>(std::floor(h));
    if (idx + 1 >= values.size()) return values.back();
    return values[idx] + (h - static_cast<double>(idx)) *
                             (values[idx + 1] - values[idx]);
  };
  stats.q1 = quantile(0.25);
  stats.median = quantile(0.5);
  stats.q3 = quantile(0.75);
  const double iqr = stats.q3 - stats.q1;
  const double low_cut = stats.q1 - 1.5 * iqr;
  const double high_cut = stats.q3 + 1.5 * iqr;
  stats.whisker_low = stats.q3;
  stats.whisker_high = stats.q1;
  for (double v : values) {
    if (v < low_cut || v > high_cut) {
      stats.outliers.push_back(v);
    } else {
      stats.whisker_low = std::min(stats.whisker_low, v);
      stats.whisker_high = std::max(stats.whisker_high, v);
    }
  }
  return stats;
}

namespace {

DiffeoMap fit_by_method(Method method, const Environment& env,
                        const FitConfig& cfg) {
  switch (method) {
    case Method::Diff:
      return fit_diff(env.inits, env.goals, cfg);
    case Method::RDiff:
      return fit_rdiff(env.inits, env.goals, cfg);
    case Method::TaDiff:
      return fit_tadiff(env.inits, env.goals, cfg);
  }
  throw std::invalid_argument("run_batch: unknown method");
}

}  // namespace

std::vector<MethodBatch> run_batch(const std::vector<Environment>& envs,
                                   const std::vector<Method>& methods,
                                   const FitConfig& cfg, int threads,
                                   double grid_spacing) {
  if (envs.empty()) {
    throw std::invalid_argument("run_batch: at least one environment");
  }
  std::vector<MethodBatch> batches(methods.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    batches[mi].method = methods[mi];
    batches[mi].environments.resize(envs.size());
  }

  struct Job {
    std::size_t method_index;
    std::size_t env_index;
  };
  std::vector<Job> jobs;
  jobs.reserve(methods.size() * envs.size());
  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    for (std::size_t ei = 0; ei < envs.size(); ++ei) jobs.push_back({mi, ei});
  }

  std::atomic<std::size_t> next{0};
  const auto worker = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= jobs.size()) break;
      const Job job = jobs[i];
      EnvOutcome& out = batches[job.method_index].environments[job.env_index];
      out.env_index = static_cast<int>(job.env_index);
      try {
        out.map = fit_by_method(methods[job.method_index], envs[job.env_index],
                                cfg);
        out.report = evaluate_map(out.map, grid_spacing);
        out.fit_ok = true;
      } catch (const std::exception& e) {
        out.fit_ok = false;
        out.error = e.what();
        log_error("environment " + std::to_string(job.env_index) + " (" +
                  method_name(methods[job.method_index]) +
                  ") failed: " + out.error);
      }
    }
  };

  const int worker_count = std::max(1, threads);
  if (worker_count == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(worker_count) - 1);
    for (int t = 1; t < worker_count; ++t) pool.emplace_back(worker);
    worker();
    for (auto& th : pool) th.join();
  }

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    MethodBatch& batch = batches[mi];
    BatchSummary& summary = batch.summary;
    summary.n_environments = static_cast<int>(envs.size());
    int successes = 0;
    double iter_sum = 0.0;
    int fitted = 0;
    double max_error = 0.0;
    std::vector<double> gradients;
    for (const EnvOutcome& out : batch.environments) {
      if (!out.fit_ok) continue;
      ++fitted;
      iter_sum += out.report.rbf_iterations;
      max_error = std::max(max_error, out.report.mean_keypoint_error);
      gradients.push_back(out.report.max_gradient);
      if (out.report.converged &&
          out.report.mean_keypoint_error <= cfg.position_threshold) {
        ++successes;
      }
    }
    summary.success_rate =
        static_cast<double>(successes) / static_cast<double>(envs.size());
    summary.max_positional_error = max_error;
    summary.mean_iterations = fitted > 0 ? iter_sum / fitted : 0.0;
    summary.gradient_distribution = box_stats(std::move(gradients));
  }
  return batches;
}

}  // namespace diffeo
