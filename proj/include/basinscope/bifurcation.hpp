#pragma once

// Resilience to parameter change: equilibrium-branch continuation, fold
// location, distances to bifurcation, basins in the parameter-expanded state
// space, critical slowing down, and reversibility of regime shifts.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "basin.hpp"
#include "box.hpp"
#include "equilibria.hpp"
#include "errors.hpp"
#include "expr.hpp"
#include "format.hpp"
#include "integrate.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "table.hpp"

namespace basinscope {

struct BranchPoint {
  double mu = 0.0;
  Vec state;
  Stability stability = Stability::Stable;
  double weakest_real = 0.0;
};

struct Branch {
  std::string param_name;
  std::size_t param_index = 0;
  int direction = 1;  // sign of the sweep in the parameter
  std::vector<BranchPoint> points;
  bool terminated_by_fold = false;
  std::optional<double> last_failed_mu;
};

struct FoldPoint {
  double mu = 0.0;
  Vec state;
};

inline constexpr double kMinContinuationStep = 1e-10;

namespace detail {

inline bool compatible(Stability reference, Stability s) {
  return s == reference || s == Stability::Marginal || reference == Stability::Marginal;
}

}  // namespace detail

/// Natural-parameter continuation: the previous state predicts, Newton at
/// the stepped parameter corrects, and failures halve the step. The sweep
/// stops at `mu_end` or when the step collapses below 1e-10 (a fold).
/// Corrections that jump far or change stability type count as failures so
/// the branch never hops onto a different one.
inline Branch continue_branch(const VectorField& field, std::size_t param_index, double mu_start,
                              double mu_end, double step_init, const Vec& start_state,
                              double newton_tol = kDefaultNewtonTol) {
  if (!(step_init > 0.0)) throw Error(ErrorCategory::Usage, "continuation step must be positive");
  Branch br;
  br.param_index = param_index;
  br.param_name = field.model().param_names().at(param_index);
  br.direction = mu_end >= mu_start ? 1 : -1;

  VectorField at_start = field.with_param(param_index, mu_start);
  NewtonResult first = newton(at_start, start_state, newton_tol);
  if (!first.converged || distance(first.x, start_state) > 0.25 * (1.0 + norm_inf(start_state)))
    throw ImmediateFailure();
  Equilibrium eq0 = analyze_equilibrium(at_start, first.x);
  br.points.push_back({mu_start, eq0.state, eq0.stability, eq0.weakest_real});
  const Stability reference = eq0.stability;

  double mu = mu_start;
  double step = step_init;
  while (br.direction * (mu_end - mu) > 0.0) {
    double remaining = std::fabs(mu_end - mu);
    double mu_try = std::min(step, remaining) >= remaining ? mu_end : mu + br.direction * step;
    const Vec& prev = br.points.back().state;
    VectorField at_try = field.with_param(param_index, mu_try);
    NewtonResult r = newton(at_try, prev, newton_tol);
    bool ok = r.converged && distance(r.x, prev) <= 0.25 * (1.0 + norm_inf(prev));
    if (ok) {
      Equilibrium eq = analyze_equilibrium(at_try, r.x);
      if (detail::compatible(reference, eq.stability)) {
        br.points.push_back({mu_try, eq.state, eq.stability, eq.weakest_real});
        mu = mu_try;
        continue;
      }
    }
    br.last_failed_mu = mu_try;
    step *= 0.5;
    if (step < kMinContinuationStep) {
      br.terminated_by_fold = true;
      break;
    }
  }
  return br;
}

inline Branch continue_branch(const SystemModel& m, const ParamMap& overrides,
                              const std::string& param_name, double mu_start, double mu_end,
                              double step_init, const Vec& start_state,
                              double newton_tol = kDefaultNewtonTol) {
  return continue_branch(VectorField(m, overrides), m.require_param(param_name), mu_start, mu_end,
                         step_init, start_state, newton_tol);
}

/// Newton on the augmented system {f(x, μ) = 0, det J(x, μ) = 0} in (x, μ),
/// seeded from the end of a fold-terminated branch. Every derivative is
/// symbolic; d(det J) uses the adjugate so it stays defined at the fold.
inline FoldPoint locate_fold(const VectorField& field, const Branch& branch,
                             double residual_tol = 1e-8) {
  if (branch.points.empty()) throw NoConvergence("empty branch");
  const SystemModel& m = field.model();
  const std::size_t n = m.dim();
  const std::size_t p = branch.param_index;
  const std::string& pname = m.param_names().at(p);

  // d rhs_i / d μ, and d J_ij / d z_k for z = (x_1..x_n, μ).
  std::vector<Expr> f_mu(n);
  std::vector<std::vector<std::vector<Expr>>> dj(n + 1, std::vector<std::vector<Expr>>(n));
  for (std::size_t i = 0; i < n; ++i) {
    f_mu[i] = differentiate(m.rhs()[i], pname);
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < n; ++k)
        dj[k][i].push_back(differentiate(m.jacobian_entry(i, j), m.state()[k]));
      dj[n][i].push_back(differentiate(m.jacobian_entry(i, j), pname));
    }
  }

  Vec x = branch.points.back().state;
  double mu = branch.points.back().mu;
  auto residual = [&](const Vec& xs, double mus, Vec& g, Matrix& jac_out) {
    VectorField at = field.with_param(p, mus);
    Vec f = at(xs);
    Matrix j = at.jacobian(xs);
    for (std::size_t i = 0; i < n; ++i) g[i] = f[i];
    g[n] = determinant(j);
    Matrix adj = adjugate(j);
    Matrix aug(n + 1, n + 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < n; ++k) aug(i, k) = j(i, k);
      aug(i, n) = eval(f_mu[i], xs, at.params());
    }
    for (std::size_t k = 0; k <= n; ++k) {
      double s = 0.0;
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = 0; b < n; ++b) s += adj(b, a) * eval(dj[k][a][b], xs, at.params());
      aug(n, k) = s;
    }
    jac_out = std::move(aug);
  };

  Vec g(n + 1);
  Matrix aug;
  try {
    for (int it = 0; it < kNewtonMaxIter; ++it) {
      residual(x, mu, g, aug);
      LU lu(aug);
      if (lu.singular()) throw NoConvergence("augmented fold system is singular");
      Vec dz = lu.solve(g);
      for (std::size_t i = 0; i < n; ++i) x[i] -= dz[i];
      mu -= dz[n];
      double scale = 1.0 + std::max(norm_inf(x), std::fabs(mu));
      if (norm_inf(dz) <= 1e-14 * scale) break;
    }
    residual(x, mu, g, aug);
  } catch (const DomainError& e) {
    throw NoConvergence(std::string("fold Newton: ") + e.what());
  }
  for (double v : g)
    if (!(std::fabs(v) < residual_tol)) throw NoConvergence("fold residuals above tolerance");
  return {mu, x};
}

inline double distance_to_bifurcation(double mu, const std::vector<FoldPoint>& folds) {
  if (folds.empty()) throw NoFolds();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& f : folds) best = std::min(best, std::fabs(mu - f.mu));
  return best;
}

/// Basins of a 1-D model in the (x, μ) plane, where μ is frozen per column.
/// Attractor labels are global: a column's attractor inherits the label of
/// the nearest attractor in the previous column within
/// 10 × max(cell width in x, cell width in μ); otherwise it gets a new label.
/// `map.attractors[k].state` is (x, μ) where label k first appears.
inline BasinMap expanded_basin(const VectorField& field, std::size_t param_index,
                               const Box& box, std::size_t resolution,
                               const IntegratorConfig& cfg,
                               std::size_t seeds = kDefaultSeedsPerAxis) {
  if (field.dim() != 1)
    throw Error(ErrorCategory::Usage, "expanded basins require a 1-D model");
  if (box.size() != 2) throw Error(ErrorCategory::Usage, "expanded box must be (x, mu)");
  require_nondegenerate(box);
  detail::require_grid_shape(2, resolution);

  BasinMap map;
  map.box = box;
  map.resolution = resolution;
  map.labels.assign(resolution * resolution, kUnresolved);

  BasinMap column_shape;
  column_shape.box = {box[0]};
  column_shape.resolution = resolution;
  column_shape.labels.assign(resolution, kUnresolved);
  const double hmu = box[1].width() / static_cast<double>(resolution);

  struct Column {
    std::vector<Equilibrium> attractors;
    std::vector<int> labels;
  };
  std::vector<Column> columns(resolution);
  for (std::size_t j = 0; j < resolution; ++j) {
    double mu = box[1].lo + (static_cast<double>(j) + 0.5) * hmu;
    VectorField at = field.with_param(param_index, mu);
    columns[j].attractors = stable_only(find_equilibria(at, column_shape.box, seeds));
    if (columns[j].attractors.empty()) {
      columns[j].labels.assign(resolution, kUnresolved);
      continue;
    }
    columns[j].labels = label_cells(at, column_shape, cfg, states_of(columns[j].attractors));
  }

  const double tol = 10.0 * std::max(column_shape.cell_width(0), hmu);
  struct Track {
    int label;
    double x;
  };
  std::vector<Track> active;
  for (std::size_t j = 0; j < resolution; ++j) {
    const Column& col = columns[j];
    double mu = box[1].lo + (static_cast<double>(j) + 0.5) * hmu;
    std::vector<int> global(col.attractors.size(), -1);
    std::vector<bool> used(active.size(), false);
    // Greedy nearest matching, closest pairs first.
    std::vector<std::tuple<double, std::size_t, std::size_t>> pairs;
    for (std::size_t a = 0; a < col.attractors.size(); ++a)
      for (std::size_t t = 0; t < active.size(); ++t) {
        double d = std::fabs(col.attractors[a].state[0] - active[t].x);
        if (d <= tol) pairs.emplace_back(d, a, t);
      }
    std::sort(pairs.begin(), pairs.end());
    for (const auto& [d, a, t] : pairs) {
      if (global[a] >= 0 || used[t]) continue;
      global[a] = active[t].label;
      used[t] = true;
    }
    std::vector<Track> next;
    for (std::size_t a = 0; a < col.attractors.size(); ++a) {
      if (global[a] < 0) {
        global[a] = static_cast<int>(map.attractors.size());
        Equilibrium rep = col.attractors[a];
        rep.state = {rep.state[0], mu};
        map.attractors.push_back(std::move(rep));
      }
      next.push_back({global[a], col.attractors[a].state[0]});
    }
    active = std::move(next);
    for (std::size_t i = 0; i < resolution; ++i) {
      int l = col.labels[i];
      map.labels[j * resolution + i] = l >= 0 ? global[static_cast<std::size_t>(l)] : l;
    }
  }
  return map;
}

inline BasinMap expanded_basin(const SystemModel& m, const ParamMap& overrides,
                               const std::string& param_name, const Box& box,
                               std::size_t resolution, const IntegratorConfig& cfg) {
  return expanded_basin(VectorField(m, overrides), m.require_param(param_name), box, resolution,
                        cfg);
}

/// Weighted distance sqrt((w_x Δx)² + (w_μ Δμ)²) from `point` = (x, μ) to
/// the nearest face bordering another attractor's region. A zero weight
/// restricts the search to the slice through the point along that axis, so
/// weights (1, 0) give the in-slice precariousness at fixed μ.
inline double expanded_precariousness(const Vec& point, const BasinMap& map, double w_x,
                                      double w_mu) {
  if (point.size() != 2 || map.dim() != 2)
    throw Error(ErrorCategory::Usage, "expanded precariousness needs a 2-D (x, mu) map");
  if (!(w_x >= 0.0 && w_mu >= 0.0) || (w_x == 0.0 && w_mu == 0.0))
    throw Error(ErrorCategory::Usage, "weights must be non-negative and not both zero");
  if (!contains(map.box, point)) throw Error(ErrorCategory::Usage, "point lies outside the map");
  const int home = map.labels[map.cell_of(point)];
  if (home < 0) throw Error(ErrorCategory::Inconclusive, "point lies in an unresolved cell");
  auto present = map.attractor_labels_present();
  if (present.size() < 2) throw SingleBasin();

  const auto home_idx = map.multi_index(map.cell_of(point));
  const double weight[2] = {w_x, w_mu};
  double best = std::numeric_limits<double>::infinity();
  detail::for_each_face(map, [&](std::size_t a, std::size_t b, std::size_t axis) {
    int la = map.labels[a], lb = map.labels[b];
    if (la == lb) return;
    bool other_a = la >= 0 && la != home;
    bool other_b = lb >= 0 && lb != home;
    if (!other_a && !other_b) return;
    if (weight[axis] == 0.0) return;
    auto ia = map.multi_index(a);
    for (std::size_t k = 0; k < 2; ++k)
      if (weight[k] == 0.0 && ia[k] != home_idx[k]) return;
    Vec mid = detail::face_midpoint(map, a, b);
    double dx = w_x * (mid[0] - point[0]);
    double dm = w_mu * (mid[1] - point[1]);
    best = std::min(best, std::sqrt(dx * dx + dm * dm));
  });
  if (!std::isfinite(best)) throw SingleBasin();
  return best;
}

struct CsdCurve {
  std::vector<std::pair<double, double>> rows;  // (μ, recovery rate)
  std::vector<std::string> warnings;
};

/// Recovery rate -Re(λ_weakest) of the branch equilibrium at each sample.
/// Samples at or beyond the fold, or where the branch cannot be re-solved
/// as a stable point, are skipped with a warning.
inline CsdCurve csd_curve(const VectorField& field, const Branch& branch, const FoldPoint& fold,
                          const std::vector<double>& mu_samples,
                          double newton_tol = kDefaultNewtonTol) {
  CsdCurve out;
  if (branch.points.empty()) throw Error(ErrorCategory::Usage, "empty branch");
  for (double mu : mu_samples) {
    if (branch.direction * (fold.mu - mu) <= 0.0) {
      out.warnings.push_back("sample mu=" + format_sig9(mu) + " is at or beyond the fold");
      continue;
    }
    const BranchPoint* seed = &branch.points.front();
    for (const auto& bp : branch.points)
      if (std::fabs(bp.mu - mu) < std::fabs(seed->mu - mu)) seed = &bp;
    VectorField at = field.with_param(branch.param_index, mu);
    NewtonResult r = newton(at, seed->state, newton_tol);
    if (!r.converged) {
      out.warnings.push_back("sample mu=" + format_sig9(mu) + ": branch point not found");
      continue;
    }
    Equilibrium eq = analyze_equilibrium(at, r.x);
    if (eq.stability != Stability::Stable) {
      out.warnings.push_back("sample mu=" + format_sig9(mu) + ": branch point is not stable");
      continue;
    }
    out.rows.emplace_back(mu, -eq.weakest_real);
  }
  std::sort(out.rows.begin(), out.rows.end());
  return out;
}

enum class Reversibility { Reversible, Hysteretic, Irreversible };

inline const char* reversibility_name(Reversibility r) {
  switch (r) {
    case Reversibility::Reversible: return "Reversible";
    case Reversibility::Hysteretic: return "Hysteretic";
    case Reversibility::Irreversible: return "Irreversible";
  }
  return "?";
}

struct TraceEntry {
  std::string stage;
  double mu = 0.0;
  Vec state;
};

struct ReversibilityVerdict {
  Reversibility kind = Reversibility::Reversible;
  std::optional<double> restoring_param;
  std::vector<TraceEntry> trace;
};

inline constexpr std::size_t kReversibilitySweepSamples = 200;
inline constexpr double kReversibilityBisectTol = 1e-4;

/// Replays a parameter excursion and its reversal.
///
/// 1. settle at μ0 from `start_state` (the home attractor);
/// 2. move to the excursion value and settle; if the home branch continues
///    there and the state stayed on it, the change is Reversible;
/// 3. restore μ0 and settle; recovering home means Reversible;
/// 4. otherwise sweep the accessible range outward from μ0, carrying the
///    occupied state, and look for the nearest value after which restoring
///    μ0 brings the system home (Hysteretic) or report Irreversible.
///
/// Attractor identity uses state proximity with tolerance 10 × sweep step.
/// Undecided settles in stages 1–3 make the result inconclusive; in the
/// sweep they count as not yet restored.
inline ReversibilityVerdict classify_reversibility(const VectorField& field,
                                                   std::size_t param_index, double mu0,
                                                   Interval accessible, double excursion_mu,
                                                   const IntegratorConfig& cfg,
                                                   const Vec& start_state) {
  if (!(accessible.hi > accessible.lo))
    throw Error(ErrorCategory::Usage, "accessible range must satisfy lo < hi");
  auto inside = [&](double v) { return v >= accessible.lo && v <= accessible.hi; };
  if (!inside(mu0) || !inside(excursion_mu))
    throw Error(ErrorCategory::Usage, "mu0 and the excursion must lie in the accessible range");

  const double sweep_step =
      accessible.width() / static_cast<double>(kReversibilitySweepSamples - 1);
  const double same_tol = 10.0 * sweep_step;
  auto at = [&](double mu) { return field.with_param(param_index, mu); };

  ReversibilityVerdict out;
  RelaxResult home = relax(at(mu0), start_state, cfg);
  if (home.verdict != Verdict::Settled) throw ClassificationInconclusive("initial settle");
  out.trace.push_back({"start", mu0, home.state});

  RelaxResult shifted = relax(at(excursion_mu), home.state, cfg);
  if (shifted.verdict != Verdict::Settled) throw ClassificationInconclusive("excursion");
  out.trace.push_back({"excursion", excursion_mu, shifted.state});

  if (excursion_mu != mu0) {
    Branch br = continue_branch(field, param_index, mu0, excursion_mu, sweep_step, home.state);
    if (!br.terminated_by_fold && distance(br.points.back().state, shifted.state) <= same_tol) {
      out.kind = Reversibility::Reversible;
      return out;
    }
  } else {
    out.kind = Reversibility::Reversible;
    return out;
  }

  RelaxResult back = relax(at(mu0), shifted.state, cfg);
  if (back.verdict != Verdict::Settled) throw ClassificationInconclusive("restoring mu0");
  out.trace.push_back({"restore", mu0, back.state});
  if (distance(back.state, home.state) <= same_tol) {
    out.kind = Reversibility::Reversible;
    return out;
  }

  // Relax at `mu` from `from`, then restore μ0: does the system come home?
  struct Probe {
    bool settled = false;
    Vec state;
    bool restored = false;
  };
  auto probe = [&](double mu, const Vec& from) {
    Probe p;
    RelaxResult r = relax(at(mu), from, cfg);
    if (r.verdict != Verdict::Settled) return p;
    p.settled = true;
    p.state = r.state;
    RelaxResult b = relax(at(mu0), r.state, cfg);
    p.restored = b.verdict == Verdict::Settled && distance(b.state, home.state) <= same_tol;
    return p;
  };

  struct Flip {
    double mu;
    Vec state;
  };
  auto sweep = [&](int dir) -> std::optional<Flip> {
    std::vector<double> samples;
    for (std::size_t k = 0; k < kReversibilitySweepSamples; ++k) {
      double mu = accessible.lo + sweep_step * static_cast<double>(k);
      if (dir * (mu - mu0) > 0.0) samples.push_back(mu);
    }
    if (dir < 0) std::reverse(samples.begin(), samples.end());
    double lo = mu0;
    Vec carried = back.state;
    for (double mu : samples) {
      Probe p = probe(mu, carried);
      if (p.restored) {
        double hi = mu;
        Vec hi_state = p.state;
        while (std::fabs(hi - lo) > kReversibilityBisectTol) {
          double mid = 0.5 * (lo + hi);
          Probe q = probe(mid, carried);
          if (q.restored) {
            hi = mid;
            hi_state = q.state;
          } else {
            lo = mid;
            if (q.settled) carried = q.state;
          }
        }
        return Flip{hi, hi_state};
      }
      if (p.settled) carried = p.state;
      lo = mu;
    }
    return std::nullopt;
  };

  std::optional<Flip> up = sweep(+1);
  std::optional<Flip> down = sweep(-1);
  std::optional<Flip> best;
  if (up && down)
    best = std::fabs(up->mu - mu0) <= std::fabs(down->mu - mu0) ? up : down;
  else
    best = up ? up : down;

  if (!best) {
    out.kind = Reversibility::Irreversible;
    return out;
  }
  out.kind = Reversibility::Hysteretic;
  out.restoring_param = best->mu;
  out.trace.push_back({"sweep", best->mu, best->state});
  RelaxResult home_again = relax(at(mu0), best->state, cfg);
  out.trace.push_back({"restored", mu0, home_again.state});
  return out;
}

/// "verdict=<kind> restoring=<value|none>"
inline std::string summary_line(const ReversibilityVerdict& v) {
  return std::string("verdict=") + reversibility_name(v.kind) +
         " restoring=" + (v.restoring_param ? format_sig9(*v.restoring_param) : "none");
}

inline void write_verdict_report(std::ostream& os, const ReversibilityVerdict& v,
                                 const std::string& param_name) {
  for (const auto& e : v.trace) {
    os << e.stage << ": " << param_name << '=' << format_sig9(e.mu) << " state=";
    for (std::size_t i = 0; i < e.state.size(); ++i) os << (i ? "," : "") << format_sig9(e.state[i]);
    os << '\n';
  }
  os << summary_line(v) << '\n';
}

/// "<param>,<state names>,stability,weakest_real"
inline Table branch_table(const SystemModel& m, const Branch& br) {
  Table t;
  t.header.push_back(br.param_name);
  for (const auto& s : m.state()) t.header.push_back(s);
  t.header.push_back("stability");
  t.header.push_back("weakest_real");
  for (const auto& p : br.points) {
    std::vector<Cell> row{p.mu};
    for (double v : p.state) row.emplace_back(v);
    row.emplace_back(std::string(stability_name(p.stability)));
    row.emplace_back(p.weakest_real);
    t.add_row(std::move(row));
  }
  return t;
}

/// "stage,<param>,<state names>" rows of the replayed scenario.
inline Table verdict_trace_table(const SystemModel& m, const ReversibilityVerdict& v,
                                 const std::string& param_name) {
  Table t;
  t.header = {"stage", param_name};
  for (const auto& s : m.state()) t.header.push_back(s);
  for (const auto& e : v.trace) {
    std::vector<Cell> row{e.stage, e.mu};
    for (double x : e.state) row.emplace_back(x);
    t.add_row(std::move(row));
  }
  return t;
}

/// "<param>,recovery_rate"
inline Table csd_table(const std::string& param_name, const CsdCurve& curve) {
  Table t;
  t.header = {param_name, "recovery_rate"};
  for (const auto& [mu, rate] : curve.rows) t.add_row({mu, rate});
  return t;
}

}  // namespace basinscope
