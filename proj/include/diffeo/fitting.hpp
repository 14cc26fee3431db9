#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "diffeo/keypoints.hpp"
#include "diffeo/mapping.hpp"

namespace diffeo {

struct RhoGrid {
  int count = 64;
  double min = 0.1;    // [1/m]
  double max = 100.0;  // [1/m]
};

struct FitConfig {
  double position_threshold = 0.005;     // [m]
  double orientation_threshold = 0.01;   // [rad], quaternion-log norm
  int j_max = 100;                       // max composition steps
  RhoGrid rho_grid;
  int ta_restarts = 3;                   // multi-start count per discrete combo
  double rho_sig = 10.0;                 // twist sigmoid slope [1/m]
  std::uint64_t seed = 0;                // restart perturbations
  bool orbital_about_center = false;
};

/// Mean Euclidean key-point error [m].
double cost_position(const KeyPointSet& points, const KeyPointSet& goals);

/// Mean quaternion-log-norm error [rad], half-angle convention.
double cost_orientation(const KeyPointSet& points, const KeyPointSet& goals);

/// Per-point orbital rotation r_k: the minimal rotation carrying the
/// origin-relative goal direction onto the current direction. The goal
/// orbital rotation is the identity by convention, so conj(r_k) rotates
/// the current point toward its goal direction. Points within 1e-9 of the
/// origin get the identity.
std::vector<Quat> derive_orbital(const KeyPointSet& points,
                                 const KeyPointSet& goals);

struct RhoSearchResult {
  double rho = 0.0;
  double cost = 0.0;
};

/// Line search for the RBF slope: log-spaced grid over [grid.min, grid.max]
/// intersected with (0, 0.99 * diffeo_bound) when the bound applies,
/// followed by golden-section refinement around the best grid point. Ties
/// break toward larger rho. An empty feasible grid returns the capped bound
/// itself. Candidates failing `feasible` are skipped.
RhoSearchResult optimize_rho(
    const std::function<double(double)>& cost_at_rho, const RhoGrid& grid,
    std::optional<double> diffeo_bound = std::nullopt,
    const std::function<bool(double)>& feasible = nullptr);

/// Greedy RBF composition fit restricted to translation and spin steps.
DiffeoMap fit_diff(const KeyPointSet& inits, const KeyPointSet& goals,
                   const FitConfig& cfg = {});

/// Greedy fit with the orbital branch: per iteration the translation-only
/// and orbital-only candidates are optimized independently and the cheaper
/// one is kept, the other zeroed.
DiffeoMap fit_rdiff(const KeyPointSet& inits, const KeyPointSet& goals,
                    const FitConfig& cfg = {});

struct TaFitResult {
  TwistedAffineParams params;
  double residual = 0.0;  // mean key-point error [m]
};

/// Twisted-affine fit: translation locked to the centroid difference, the
/// 32 discrete reflection/twist combinations scanned in lexicographic
/// order, and the 9 continuous parameters minimized per combination by a
/// bounded quasi-Newton method with multi-start.
TaFitResult fit_twisted_affine(const KeyPointSet& inits,
                               const KeyPointSet& goals,
                               const FitConfig& cfg = {});

/// Twisted-affine prefix followed by greedy RBF refinement of the residual.
DiffeoMap fit_tadiff(const KeyPointSet& inits, const KeyPointSet& goals,
                     const FitConfig& cfg = {});

/// Upper bound on the translation-step slope that guarantees the step is a
/// diffeomorphism: e^(1/2) / (sqrt(2) * ||v||). Infinite for ||v|| = 0.
double translation_diffeo_bound(const Vec3& v);

}  // namespace diffeo
