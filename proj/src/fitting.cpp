#include "diffeo/fitting.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "diffeo/log.hpp"
#include "diffeo/rng.hpp"

namespace diffeo {
namespace {

constexpr double kRhoSafety = 0.99;
constexpr double kInf = std::numeric_limits<double>::infinity();

struct FitState {
  std::vector<Vec3> p;
  std::vector<Quat> q;
  std::vector<Vec3> goal_p;
  std::vector<Quat> goal_q;

  std::size_t size() const { return p.size(); }
};

FitState make_state(const KeyPointSet& inits, const KeyPointSet& goals) {
  FitState st;
  st.p.reserve(inits.size());
  st.q.reserve(inits.size());
  st.goal_p.reserve(goals.size());
  st.goal_q.reserve(goals.size());
  for (const auto& kp : inits.points) {
    st.p.push_back(kp.position);
    st.q.push_back(kp.orientation.normalized());
  }
  for (const auto& kp : goals.points) {
    st.goal_p.push_back(kp.position);
    st.goal_q.push_back(kp.orientation.normalized());
  }
  return st;
}

double position_cost_of(const FitState& st) {
  double sum = 0.0;
  for (std::size_t k = 0; k < st.size(); ++k) {
    sum += (st.goal_p[k] - st.p[k]).norm();
  }
  return sum / static_cast<double>(st.size());
}

double orientation_cost_of(const FitState& st) {
  double sum = 0.0;
  for (std::size_t k = 0; k < st.size(); ++k) {
    sum += quat_log(st.goal_q[k] * st.q[k].conjugate()).norm();
  }
  return sum / static_cast<double>(st.size());
}

double translation_candidate_cost(const FitState& st, const Vec3& center,
                                  double rho, const Vec3& v) {
  double sum = 0.0;
  for (std::size_t k = 0; k < st.size(); ++k) {
    const Vec3 stepped = st.p[k] + rbf(st.p[k], rho, center) * v;
    sum += (st.goal_p[k] - stepped).norm();
  }
  return sum / static_cast<double>(st.size());
}

double orbital_candidate_cost(const FitState& st, CompositionStep step,
                              double rho, bool about_center) {
  step.rho = rho;
  double sum = 0.0;
  for (std::size_t k = 0; k < st.size(); ++k) {
    sum += (st.goal_p[k] - apply_position_step(step, st.p[k], about_center))
               .norm();
  }
  return sum / static_cast<double>(st.size());
}

double spin_candidate_cost(const FitState& st, const Vec3& center, double rho,
                           const Quat& v) {
  double sum = 0.0;
  for (std::size_t k = 0; k < st.size(); ++k) {
    const double w = rbf(st.p[k], rho, center);
    const Quat stepped = (quat_pow(v, w) * st.q[k]).normalized();
    sum += quat_log(st.goal_q[k] * stepped.conjugate()).norm();
  }
  return sum / static_cast<double>(st.size());
}

// Determinant of the central-difference Jacobian of a single step.
double step_jacobian_det(const CompositionStep& step, const Vec3& at,
                         bool about_center) {
  const double h = 1e-5;
  Mat3 jac;
  for (int i = 0; i < 3; ++i) {
    Vec3 dp = Vec3::Zero();
    dp(i) = h;
    jac.col(i) = (apply_position_step(step, at + dp, about_center) -
                  apply_position_step(step, at - dp, about_center)) /
                 (2.0 * h);
  }
  return jac.determinant();
}

// Orbital candidates are accepted only when the step keeps a positive
// Jacobian determinant at every key point and at the corners of the
// key-point bounding box.
bool orbital_step_invertible(CompositionStep step, double rho,
                             const std::vector<Vec3>& pts,
                             bool about_center) {
  step.rho = rho;
  Vec3 lo = pts.front();
  Vec3 hi = pts.front();
  for (const Vec3& p : pts) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (const Vec3& p : pts) {
    if (step_jacobian_det(step, p, about_center) <= 0.0) return false;
  }
  for (int corner = 0; corner < 8; ++corner) {
    const Vec3 p((corner & 1) != 0 ? hi.x() : lo.x(),
                 (corner & 2) != 0 ? hi.y() : lo.y(),
                 (corner & 4) != 0 ? hi.z() : lo.z());
    if (step_jacobian_det(step, p, about_center) <= 0.0) return false;
  }
  return true;
}

std::size_t argmax_position_error(const FitState& st) {
  std::size_t best = 0;
  double best_err = -1.0;
  for (std::size_t k = 0; k < st.size(); ++k) {
    const double err = (st.goal_p[k] - st.p[k]).norm();
    if (err > best_err) {
      best_err = err;
      best = k;
    }
  }
  return best;
}

std::size_t argmax_orientation_error(const FitState& st) {
  std::size_t best = 0;
  double best_err = -1.0;
  for (std::size_t k = 0; k < st.size(); ++k) {
    const double err = quat_log(st.goal_q[k] * st.q[k].conjugate()).norm();
    if (err > best_err) {
      best_err = err;
      best = k;
    }
  }
  return best;
}

std::vector<Quat> orbital_rotations(const FitState& st) {
  std::vector<Quat> r(st.size());
  for (std::size_t k = 0; k < st.size(); ++k) {
    r[k] = quat_between_directions(st.goal_p[k], st.p[k]);
  }
  return r;
}

DiffeoMap fit_composition(const KeyPointSet& inits, const KeyPointSet& goals,
                          const FitConfig& cfg, Method method,
                          bool with_orbital) {
  inits.validate();
  goals.validate();
  require_aligned(inits, goals);

  FitState st = make_state(inits, goals);
  DiffeoMap map;
  map.method = method;
  map.orbital_about_center = cfg.orbital_about_center;
  map.fit_inits = inits;
  map.fit_goals = goals;
  FitDiagnostics& diag = map.diagnostics;

  double pos_cost = position_cost_of(st);
  double ori_cost = orientation_cost_of(st);
  diag.per_iteration_costs.push_back({pos_cost, ori_cost});

  int iteration = 0;
  while (iteration < cfg.j_max && (pos_cost > cfg.position_threshold ||
                                   ori_cost > cfg.orientation_threshold)) {
    // Position branch: translation candidate at the worst point, plus the
    // orbital candidate when enabled; the cheaper one wins, the other is
    // dropped.
    std::optional<CompositionStep> pos_step;
    if (pos_cost > cfg.position_threshold) {
      const std::size_t m = argmax_position_error(st);
      CompositionStep translation;
      translation.kind = StepKind::Translation;
      translation.center = st.p[m];
      translation.v_translation = st.goal_p[m] - st.p[m];
      const double bound =
          translation_diffeo_bound(translation.v_translation);
      const RhoSearchResult tr = optimize_rho(
          [&](double rho) {
            return translation_candidate_cost(st, translation.center, rho,
                                              translation.v_translation);
          },
          cfg.rho_grid, bound);
      translation.rho = tr.rho;

      CompositionStep chosen = translation;
      double chosen_cost = tr.cost;

      if (with_orbital) {
        const std::vector<Quat> r = orbital_rotations(st);
        std::size_t o = 0;
        double worst_angle = -1.0;
        for (std::size_t k = 0; k < r.size(); ++k) {
          const double angle = quat_log(r[k]).norm();
          if (angle > worst_angle) {
            worst_angle = angle;
            o = k;
          }
        }
        if (worst_angle > 1e-12) {
          CompositionStep orbital;
          orbital.kind = StepKind::Orbital;
          orbital.center = st.p[o];
          orbital.v_rotation = r[o].conjugate().normalized();
          const RhoSearchResult ob = optimize_rho(
              [&](double rho) {
                return orbital_candidate_cost(st, orbital, rho,
                                              cfg.orbital_about_center);
              },
              cfg.rho_grid, std::nullopt,
              [&](double rho) {
                return orbital_step_invertible(orbital, rho, st.p,
                                               cfg.orbital_about_center);
              });
          if (ob.cost < chosen_cost) {
            orbital.rho = ob.rho;
            chosen = orbital;
            chosen_cost = ob.cost;
          }
        }
      }

      (void)chosen_cost;
      pos_step = chosen;
    }

    // Orientation branch. The kernel center and all weights use the
    // positions before this iteration's position update.
    std::optional<CompositionStep> ori_step;
    if (ori_cost > cfg.orientation_threshold) {
      const std::size_t n = argmax_orientation_error(st);
      CompositionStep spin;
      spin.kind = StepKind::Spin;
      spin.center = st.p[n];
      spin.v_rotation = (st.goal_q[n] * st.q[n].conjugate()).normalized();
      const RhoSearchResult sp = optimize_rho(
          [&](double rho) {
            return spin_candidate_cost(st, spin.center, rho, spin.v_rotation);
          },
          cfg.rho_grid);
      spin.rho = sp.rho;
      ori_step = spin;
    }

    if (ori_step) {
      for (std::size_t k = 0; k < st.size(); ++k) {
        const double w = rbf(st.p[k], ori_step->rho, ori_step->center);
        st.q[k] = (quat_pow(ori_step->v_rotation, w) * st.q[k]).normalized();
      }
      map.orientation_steps.push_back(*ori_step);
    }
    if (pos_step) {
      for (std::size_t k = 0; k < st.size(); ++k) {
        st.p[k] =
            apply_position_step(*pos_step, st.p[k], cfg.orbital_about_center);
      }
      map.position_steps.push_back(*pos_step);
    }

    pos_cost = position_cost_of(st);
    ori_cost = orientation_cost_of(st);
    ++iteration;
    diag.per_iteration_costs.push_back({pos_cost, ori_cost});
  }

  diag.iterations = iteration;
  diag.final_position_cost = pos_cost;
  diag.final_orientation_cost = ori_cost;
  diag.converged = pos_cost <= cfg.position_threshold &&
                   ori_cost <= cfg.orientation_threshold;
  return map;
}

struct BfgsResult {
  Eigen::VectorXd x;
  double cost = kInf;
};

// Bounded quasi-Newton: BFGS on the inverse Hessian with gradient
// projection at active box bounds and Armijo backtracking along the
// projected path.
BfgsResult minimize_box_bfgs(
    const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi, int max_iters,
    double cost_tol) {
  const int n = static_cast<int>(x.size());
  const auto project = [&](const Eigen::VectorXd& v) -> Eigen::VectorXd {
    return v.cwiseMax(lo).cwiseMin(hi);
  };
  const auto gradient = [&](const Eigen::VectorXd& at) {
    Eigen::VectorXd g(n);
    for (int i = 0; i < n; ++i) {
      const double h = 1e-7 * std::max(1.0, std::abs(at(i)));
      Eigen::VectorXd fwd = at;
      Eigen::VectorXd bwd = at;
      fwd(i) += h;
      bwd(i) -= h;
      g(i) = (f(fwd) - f(bwd)) / (2.0 * h);
    }
    return g;
  };

  x = project(x);
  double fx = f(x);
  Eigen::VectorXd g = gradient(x);
  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(n, n);
  int flat_count = 0;

  for (int iter = 0; iter < max_iters; ++iter) {
    Eigen::VectorXd gp = g;
    for (int i = 0; i < n; ++i) {
      if (x(i) <= lo(i) + 1e-12 && gp(i) > 0.0) gp(i) = 0.0;
      if (x(i) >= hi(i) - 1e-12 && gp(i) < 0.0) gp(i) = 0.0;
    }
    if (gp.lpNorm<Eigen::Infinity>() < 1e-12) break;

    Eigen::VectorXd dir = -(hinv * gp);
    if (dir.dot(gp) >= 0.0) {
      hinv.setIdentity();
      dir = -gp;
    }

    double alpha = 1.0;
    Eigen::VectorXd xnew = x;
    double fnew = fx;
    bool accepted = false;
    while (alpha > 1e-14) {
      xnew = project(x + alpha * dir);
      fnew = f(xnew);
      if (fnew <= fx + 1e-4 * gp.dot(xnew - x)) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) break;

    const Eigen::VectorXd gnew = gradient(xnew);
    const Eigen::VectorXd s = xnew - x;
    const Eigen::VectorXd y = gnew - g;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      const Eigen::VectorXd hy = hinv * y;
      const double yhy = y.dot(hy);
      hinv += ((sy + yhy) / (sy * sy)) * (s * s.transpose()) -
              (hy * s.transpose() + s * hy.transpose()) / sy;
    }

    const bool flat = std::abs(fx - fnew) <= cost_tol * (1.0 + std::abs(fx));
    x = xnew;
    fx = fnew;
    g = gnew;
    if (flat) {
      if (++flat_count >= 2) break;
    } else {
      flat_count = 0;
    }
  }
  return {x, fx};
}

}  // namespace

double translation_diffeo_bound(const Vec3& v) {
  const double norm = v.norm();
  if (norm < 1e-300) return kInf;
  return std::exp(0.5) / (std::sqrt(2.0) * norm);
}

double cost_position(const KeyPointSet& points, const KeyPointSet& goals) {
  require_aligned(points, goals);
  if (points.size() == 0) {
    throw std::invalid_argument("cost_position: empty key point sets");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    sum += (goals.points[k].position - points.points[k].position).norm();
  }
  return sum / static_cast<double>(points.size());
}

double cost_orientation(const KeyPointSet& points, const KeyPointSet& goals) {
  require_aligned(points, goals);
  if (points.size() == 0) {
    throw std::invalid_argument("cost_orientation: empty key point sets");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < points.size(); ++k) {
    sum += quat_log(goals.points[k].orientation *
                    points.points[k].orientation.conjugate())
               .norm();
  }
  return sum / static_cast<double>(points.size());
}

std::vector<Quat> derive_orbital(const KeyPointSet& points,
                                 const KeyPointSet& goals) {
  require_aligned(points, goals);
  std::vector<Quat> r(points.size());
  for (std::size_t k = 0; k < points.size(); ++k) {
    r[k] = quat_between_directions(goals.points[k].position,
                                   points.points[k].position);
  }
  return r;
}

RhoSearchResult optimize_rho(const std::function<double(double)>& cost_at_rho,
                             const RhoGrid& grid,
                             std::optional<double> diffeo_bound,
                             const std::function<bool(double)>& feasible) {
  if (grid.count < 1 || grid.min <= 0.0 || grid.max < grid.min) {
    throw std::invalid_argument("optimize_rho: malformed grid");
  }
  const double cap = diffeo_bound ? kRhoSafety * (*diffeo_bound) : kInf;

  std::vector<double> candidates;
  candidates.reserve(static_cast<std::size_t>(grid.count) + 1);
  const double log_min = std::log(grid.min);
  const double log_max = std::log(grid.max);
  for (int i = 0; i < grid.count; ++i) {
    const double t =
        grid.count == 1 ? 0.0 : static_cast<double>(i) / (grid.count - 1);
    const double rho = std::exp(log_min + t * (log_max - log_min));
    if (rho < cap) candidates.push_back(rho);
  }
  if (std::isfinite(cap) && cap <= grid.max) candidates.push_back(cap);
  if (candidates.empty()) {
    // Bound above the whole grid yet below nothing usable; should not
    // happen, but fall back to the capped supremum.
    return {cap, cost_at_rho(cap)};
  }

  double best_rho = 0.0;
  double best_cost = kInf;
  int best_idx = -1;
  for (int i = 0; i < static_cast<int>(candidates.size()); ++i) {
    const double rho = candidates[i];
    if (feasible && !feasible(rho)) continue;
    const double cost = cost_at_rho(rho);
    if (cost <= best_cost) {  // ties break toward larger rho
      best_cost = cost;
      best_rho = rho;
      best_idx = i;
    }
  }
  if (best_idx < 0) return {0.0, kInf};  // no feasible candidate

  const double lo = best_idx > 0 ? candidates[best_idx - 1] : best_rho;
  const double hi = best_idx + 1 < static_cast<int>(candidates.size())
                        ? candidates[best_idx + 1]
                        : best_rho;
  if (hi > lo) {
    const double golden = (std::sqrt(5.0) - 1.0) / 2.0;
    const auto eval = [&](double log_rho) {
      const double rho = std::exp(log_rho);
      if (feasible && !feasible(rho)) return kInf;
      return cost_at_rho(rho);
    };
    double a = std::log(lo);
    double b = std::log(hi);
    double x1 = b - golden * (b - a);
    double x2 = a + golden * (b - a);
    double f1 = eval(x1);
    double f2 = eval(x2);
    for (int it = 0; it < 40; ++it) {
      if (f1 > f2) {
        a = x1;
        x1 = x2;
        f1 = f2;
        x2 = a + golden * (b - a);
        f2 = eval(x2);
      } else {
        b = x2;
        x2 = x1;
        f2 = f1;
        x1 = b - golden * (b - a);
        f1 = eval(x1);
      }
    }
    const double refined_cost = std::min(f1, f2);
    double refined_rho = std::exp(f1 < f2 ? x1 : x2);
    if (std::isfinite(cap)) refined_rho = std::min(refined_rho, cap);
    if (refined_cost < best_cost) {
      best_cost = refined_cost;
      best_rho = refined_rho;
    }
  }
  return {best_rho, best_cost};
}

DiffeoMap fit_diff(const KeyPointSet& inits, const KeyPointSet& goals,
                   const FitConfig& cfg) {
  return fit_composition(inits, goals, cfg, Method::Diff, false);
}

DiffeoMap fit_rdiff(const KeyPointSet& inits, const KeyPointSet& goals,
                    const FitConfig& cfg) {
  return fit_composition(inits, goals, cfg, Method::RDiff, true);
}

TaFitResult fit_twisted_affine(const KeyPointSet& inits,
                               const KeyPointSet& goals,
                               const FitConfig& cfg) {
  inits.validate();
  goals.validate();
  require_aligned(inits, goals);
  const auto box = inits.bounding_box();
  if ((box.second - box.first).norm() < 1e-9) {
    throw std::invalid_argument(
        "fit_twisted_affine: init key points are coincident");
  }
  const std::size_t count = inits.size();
  if (count != 4) {
    log_info("twisted-affine fit assumes 4 key points; got " +
             std::to_string(count));
  }

  const Vec3 mu_init = inits.centroid();
  const Vec3 mu_goal = goals.centroid();
  std::vector<Vec3> centered(count);
  std::vector<Vec3> target(count);
  for (std::size_t k = 0; k < count; ++k) {
    centered[k] = inits.points[k].position - mu_init;
    target[k] = goals.points[k].position;
  }

  struct Combo {
    double rx, ry, rz, roll_amp, pitch_amp;
  };
  std::vector<Combo> combos;
  combos.reserve(32);
  const double pi = std::numbers::pi;
  for (double rx : {-1.0, 1.0})
    for (double ry : {-1.0, 1.0})
      for (double rz : {-1.0, 1.0})
        for (double roll : {0.0, pi})
          for (double pitch : {0.0, pi}) {
            combos.push_back({rx, ry, rz, roll, pitch});
          }

  const auto make_params = [&](const Combo& combo, const Eigen::VectorXd& x) {
    TwistedAffineParams tp;
    tp.scaling = Vec3(x(0), x(1), x(2));
    tp.shear = Vec3(x(3), x(4), x(5));
    tp.rotation = Vec3(x(6), x(7), x(8));
    tp.reflection = Vec3(combo.rx, combo.ry, combo.rz);
    tp.twist_roll = combo.roll_amp;
    tp.twist_pitch = combo.pitch_amp;
    tp.rho_sig = cfg.rho_sig;
    tp.translation = mu_goal - mu_init;
    tp.mu_init = mu_init;
    tp.mu_goal = mu_goal;
    return tp;
  };

  // Mean-norm residual, smoothed at zero so numerical gradients stay
  // bounded near perfect fits. The reported residual is the exact mean.
  const auto cost_of = [&](const TwistedAffineParams& tp, bool smoothed) {
    const Mat3 prefix = affine_factor(tp);
    double sum = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
      const Vec3& d = centered[k];
      const Mat3 twist = twist_rotation(
          twist_angle(d.x(), tp.twist_roll, tp.rho_sig),
          twist_angle(d.y(), tp.twist_pitch, tp.rho_sig));
      const Vec3 mapped = prefix * (twist * d) + mu_goal;
      const double sq = (target[k] - mapped).squaredNorm();
      sum += smoothed ? std::sqrt(sq + 1e-24) : std::sqrt(sq);
    }
    return sum / static_cast<double>(count);
  };

  Eigen::VectorXd lo(9), hi(9);
  lo << 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, -pi / 2, -pi / 2, -pi / 2;
  hi << 2.0, 2.0, 2.0, 1.0, 1.0, 1.0, pi / 2, pi / 2, pi / 2;

  // Multi-start points, generated once and shared across combos.
  Rng rng(cfg.seed);
  std::vector<Eigen::VectorXd> starts;
  Eigen::VectorXd identity(9);
  identity << 1, 1, 1, 0, 0, 0, 0, 0, 0;
  starts.push_back(identity);
  for (int r = 1; r < std::max(1, cfg.ta_restarts); ++r) {
    Eigen::VectorXd x(9);
    for (int i = 0; i < 3; ++i) x(i) = 1.0 + 0.4 * rng.uniform(-1.0, 1.0);
    for (int i = 3; i < 6; ++i) x(i) = 0.5 * rng.unit();
    for (int i = 6; i < 9; ++i) x(i) = 1.2 * rng.uniform(-1.0, 1.0);
    starts.push_back(x.cwiseMax(lo).cwiseMin(hi));
  }

  double best_cost = kInf;
  Eigen::VectorXd best_x = identity;
  Combo best_combo = combos.front();
  for (const Combo& combo : combos) {
    for (const Eigen::VectorXd& start : starts) {
      const BfgsResult res = minimize_box_bfgs(
          [&](const Eigen::VectorXd& x) {
            return cost_of(make_params(combo, x), true);
          },
          start, lo, hi, 200, 1e-10);
      if (res.cost < best_cost) {  // ties keep the earlier combo
        best_cost = res.cost;
        best_x = res.x;
        best_combo = combo;
      }
    }
  }

  TaFitResult out;
  out.params = make_params(best_combo, best_x);
  out.residual = cost_of(out.params, false);
  return out;
}

DiffeoMap fit_tadiff(const KeyPointSet& inits, const KeyPointSet& goals,
                     const FitConfig& cfg) {
  const TaFitResult ta = fit_twisted_affine(inits, goals, cfg);
  KeyPointSet mapped = inits;
  for (auto& kp : mapped.points) {
    kp.position = twisted_affine_apply(ta.params, kp.position);
  }
  DiffeoMap map = fit_composition(mapped, goals, cfg, Method::TaDiff, false);
  map.ta_prefix = ta.params;
  map.diagnostics.ta_residual = ta.residual;
  map.fit_inits = inits;
  map.fit_goals = goals;
  return map;
}

}  // namespace diffeo
