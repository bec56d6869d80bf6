#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "box.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "integrate.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "table.hpp"

namespace basinscope {

enum class Stability { Stable, Unstable, Saddle, Marginal };

inline const char* stability_name(Stability s) {
  switch (s) {
    case Stability::Stable: return "Stable";
    case Stability::Unstable: return "Unstable";
    case Stability::Saddle: return "Saddle";
    case Stability::Marginal: return "Marginal";
  }
  return "?";
}

/// Eigenvalues with |Re| at or below this are treated as zero.
inline constexpr double kMarginalTol = 1e-6;
inline constexpr double kDefaultNewtonTol = 1e-10;
inline constexpr int kNewtonMaxIter = 50;
inline constexpr double kDedupeDistance = 1e-6;

inline Stability classify_stability(const std::vector<std::complex<double>>& ev,
                                    double tol = kMarginalTol) {
  bool all_neg = true, any_neg = false, any_pos = false, any_zero = false;
  for (const auto& l : ev) {
    double re = l.real();
    if (!(re < -tol)) all_neg = false;
    if (std::fabs(re) <= tol) any_zero = true;
    if (re < -tol) any_neg = true;
    if (re > tol) any_pos = true;
  }
  if (all_neg) return Stability::Stable;
  if (any_zero) return Stability::Marginal;
  if (any_neg && any_pos) return Stability::Saddle;
  return Stability::Unstable;
}

struct Equilibrium {
  Vec state;
  Matrix jacobian;
  std::vector<std::complex<double>> eigenvalues;
  Stability stability = Stability::Unstable;
  double weakest_real = 0.0;  // largest real part among the eigenvalues
};

inline Matrix jacobian(const VectorField& field, const Vec& state) {
  for (double v : state)
    if (!std::isfinite(v)) throw Error(ErrorCategory::Usage, "state must be finite");
  return field.jacobian(state);
}

inline Matrix jacobian(const SystemModel& m, const Vec& state, const ParamMap& overrides) {
  return jacobian(VectorField(m, overrides), state);
}

/// Linearization and classification at a known equilibrium point.
inline Equilibrium analyze_equilibrium(const VectorField& field, Vec state) {
  Equilibrium eq;
  eq.jacobian = field.jacobian(state);
  eq.state = std::move(state);
  eq.eigenvalues = eigenvalues(eq.jacobian);
  eq.stability = classify_stability(eq.eigenvalues);
  eq.weakest_real = eq.eigenvalues.front().real();
  return eq;
}

struct NewtonResult {
  bool converged = false;
  bool singular = false;
  Vec x;
  double residual = HUGE_VAL;
};

/// Newton's method on f(x) = 0 with the symbolic Jacobian. Iterates until
/// the update stalls at rounding level, then accepts when ‖f‖∞ < tol.
inline NewtonResult newton(const VectorField& field, Vec x, double tol,
                           int max_iter = kNewtonMaxIter) {
  NewtonResult out;
  try {
    Vec f = field(x);
    for (int it = 0; it < max_iter; ++it) {
      if (norm_inf(f) == 0.0) break;
      LU lu(field.jacobian(x));
      if (lu.singular()) {
        out.singular = true;
        out.x = x;
        out.residual = norm_inf(f);
        return out;
      }
      Vec dx = lu.solve(f);
      for (std::size_t i = 0; i < x.size(); ++i) x[i] -= dx[i];
      f = field(x);
      if (norm_inf(dx) <= 1e-14 * (1.0 + norm_inf(x))) break;
    }
    out.residual = norm_inf(f);
    out.x = std::move(x);
    out.converged = std::isfinite(out.residual) && out.residual < tol;
  } catch (const DomainError&) {
    out.converged = false;
  }
  return out;
}

/// Seed-grid Newton search. Completeness is attempted, not guaranteed: a root
/// whose Newton basin misses every seed is not reported.
inline std::vector<Equilibrium> find_equilibria(const VectorField& field, const Box& box,
                                                std::size_t seeds_per_axis,
                                                double newton_tol = kDefaultNewtonTol) {
  const std::size_t n = field.dim();
  if (box.size() != n) throw Error(ErrorCategory::Usage, "box dimension does not match model");
  require_nondegenerate(box);
  if (seeds_per_axis < 2) throw Error(ErrorCategory::Usage, "seeds_per_axis must be >= 2");

  std::size_t total = 1;
  for (std::size_t i = 0; i < n; ++i) total *= seeds_per_axis;

  std::vector<std::optional<Vec>> roots(total);
  parallel_for(total, [&](std::size_t s) {
    Vec seed(n);
    std::size_t rem = s;
    for (std::size_t axis = 0; axis < n; ++axis) {
      std::size_t k = rem % seeds_per_axis;
      rem /= seeds_per_axis;
      seed[axis] = box[axis].lo + box[axis].width() * static_cast<double>(k) /
                                      static_cast<double>(seeds_per_axis - 1);
    }
    NewtonResult r = newton(field, std::move(seed), newton_tol);
    if (r.converged && contains(box, r.x)) roots[s] = std::move(r.x);
  });

  std::vector<Vec> found;
  for (auto& r : roots)
    if (r) found.push_back(std::move(*r));
  std::sort(found.begin(), found.end());
  std::vector<Vec> unique;
  for (auto& x : found) {
    bool dup = std::any_of(unique.begin(), unique.end(),
                           [&](const Vec& u) { return distance(u, x) < kDedupeDistance; });
    if (!dup) unique.push_back(std::move(x));
  }
  std::vector<Equilibrium> out;
  out.reserve(unique.size());
  for (auto& x : unique) out.push_back(analyze_equilibrium(field, std::move(x)));
  return out;
}

inline std::vector<Equilibrium> find_equilibria(const SystemModel& m, const ParamMap& overrides,
                                                const Box& box, std::size_t seeds_per_axis,
                                                double newton_tol = kDefaultNewtonTol) {
  return find_equilibria(VectorField(m, overrides), box, seeds_per_axis, newton_tol);
}

inline std::vector<Equilibrium> stable_only(const std::vector<Equilibrium>& eqs) {
  std::vector<Equilibrium> out;
  std::copy_if(eqs.begin(), eqs.end(), std::back_inserter(out),
               [](const Equilibrium& e) { return e.stability == Stability::Stable; });
  return out;
}

inline std::vector<Vec> states_of(const std::vector<Equilibrium>& eqs) {
  std::vector<Vec> out;
  for (const auto& e : eqs) out.push_back(e.state);
  return out;
}

struct ReturnTime {
  double time = 0.0;
  double pimm_resilience = 0.0;
};

/// Characteristic 1/e recovery time -1/Re(λ_weakest) and its reciprocal.
inline ReturnTime return_time(const Equilibrium& eq) {
  if (eq.stability != Stability::Stable) throw NotStable();
  return {-1.0 / eq.weakest_real, -eq.weakest_real};
}

/// Outcome of flowing a state to rest without a precomputed attractor list.
struct RelaxResult {
  Verdict verdict = Verdict::Undecided;
  Vec state;  // the polished stable equilibrium when Settled
  double elapsed = 0.0;
};

/// Integrates until the trajectory comes to rest at a stable equilibrium
/// (confirmed by Newton polishing and eigenvalues), escapes, or hits t_max.
inline RelaxResult relax(const VectorField& field, const Vec& x0, const IntegratorConfig& cfg,
                         double newton_tol = kDefaultNewtonTol) {
  cfg.validate();
  RelaxResult out;
  auto try_rest = [&](const Vec& x) -> bool {
    Vec f = field(x);
    if (norm_inf(f) > 1e-6) return false;
    NewtonResult r = newton(field, x, newton_tol);
    if (!r.converged) return false;
    if (distance(r.x, x) > 10.0 * cfg.capture_radius + 1e-3) return false;
    Equilibrium eq = analyze_equilibrium(field, r.x);
    if (eq.stability != Stability::Stable) return false;
    out.verdict = Verdict::Settled;
    out.state = std::move(r.x);
    return true;
  };
  try {
    if (try_rest(x0)) return out;
    Stepper stepper(field, cfg, x0);
    while (stepper.t() < cfg.t_max) {
      stepper.step(cfg.t_max);
      if (norm_inf(stepper.x()) > kDivergenceNorm) {
        out.verdict = Verdict::Diverged;
        out.state = stepper.x();
        out.elapsed = stepper.t();
        return out;
      }
      if (try_rest(stepper.x())) {
        out.elapsed = stepper.t();
        return out;
      }
    }
    out.state = stepper.x();
    out.elapsed = stepper.t();
  } catch (const Blowup& b) {
    out.verdict = Verdict::Diverged;
    out.elapsed = b.time();
  }
  return out;
}

/// "<state names>,stability,weakest_real,return_time"; return_time is empty
/// for non-stable rows.
inline Table equilibria_table(const SystemModel& m, const std::vector<Equilibrium>& eqs) {
  Table t;
  t.header = m.state();
  for (const char* h : {"stability", "weakest_real", "return_time"}) t.header.push_back(h);
  for (const auto& e : eqs) {
    std::vector<Cell> row(e.state.begin(), e.state.end());
    row.emplace_back(std::string(stability_name(e.stability)));
    row.emplace_back(e.weakest_real);
    if (e.stability == Stability::Stable)
      row.emplace_back(return_time(e).time);
    else
      row.emplace_back(std::monostate{});
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace basinscope
