#pragma once

#include <string>
#include <vector>

#include "diffeo/fitting.hpp"
#include "diffeo/keypoints.hpp"
#include "diffeo/mapping.hpp"

namespace diffeo {

/// Axis-aligned evaluation grid for gradient and determinant sweeps.
struct GradientGridSpec {
  Vec3 lo = Vec3::Zero();
  Vec3 hi = Vec3::Zero();
  double spacing = 0.02;  // [m]

  /// Key-point bounding box inflated by `inflate` on every side.
  static GradientGridSpec for_keypoints(const KeyPointSet& points,
                                        double inflate = 0.05,
                                        double spacing = 0.02);
  std::vector<Vec3> points() const;
};

struct EvaluationReport {
  std::string method;
  double mean_keypoint_error = 0.0;  // [m]
  double max_keypoint_error = 0.0;   // [m]
  double max_gradient = 0.0;         // spectral norm of the Jacobian
  double min_jacobian_det = 0.0;
  int rbf_iterations = 0;
  bool converged = false;
  double wall_time_s = 0.0;
};

/// Maps every init key point, compares against the goals and sweeps the
/// grid for the worst gradient and smallest Jacobian determinant.
EvaluationReport evaluate_map(const DiffeoMap& map, const KeyPointSet& inits,
                              const KeyPointSet& goals,
                              const GradientGridSpec& grid);

/// Same, with the grid derived from the map's embedded fit key points.
EvaluationReport evaluate_map(const DiffeoMap& map, double grid_spacing = 0.02);

/// Boxplot-style summary: quartiles, 1.5 IQR whiskers, outliers.
struct BoxStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_low = 0.0;
  double whisker_high = 0.0;
  std::vector<double> outliers;
};

BoxStats box_stats(std::vector<double> values);

struct BatchSummary {
  int n_environments = 0;
  double success_rate = 0.0;          // converged below threshold
  double max_positional_error = 0.0;  // max over envs of final mean error
  double mean_iterations = 0.0;
  BoxStats gradient_distribution;     // max gradient per environment
};

struct EnvOutcome {
  int env_index = 0;
  bool fit_ok = false;
  std::string error;
  DiffeoMap map;
  EvaluationReport report;
};

struct MethodBatch {
  Method method = Method::Diff;
  BatchSummary summary;
  std::vector<EnvOutcome> environments;
};

/// Fits and evaluates every method on every environment. Individual fit
/// failures are recorded per environment and never abort the batch.
/// Environments may run on `threads` workers; results are slotted by
/// environment index so the aggregation is order independent.
std::vector<MethodBatch> run_batch(const std::vector<Environment>& envs,
                                   const std::vector<Method>& methods,
                                   const FitConfig& cfg, int threads = 1,
                                   double grid_spacing = 0.02);

}  // namespace diffeo
