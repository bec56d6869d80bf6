#pragma once

// Resilience to repeated impulsive perturbations, resistance to press
// forcing, and one-dimensional stability-landscape geometry.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <utility>
#include <vector>

#include "basin.hpp"
#include "box.hpp"
#include "equilibria.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "integrate.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "table.hpp"

namespace basinscope {

struct KickSchedule {
  Vec direction;           // unit vector
  double magnitude = 0.0;  // δ >= 0
  double period = 1.0;     // τ > 0, flow time after each kick
  std::size_t count = 1;
};

struct KickOutcome {
  std::optional<bool> escaped;  // empty when the final settle is undecided
  std::size_t kicks_applied = 0;
  Vec final_state;
  Verdict final_verdict = Verdict::Undecided;
  std::optional<double> min_threshold_distance;
};

/// Alternates instantaneous jumps x <- x + δ·direction with flow of duration
/// τ, then settles once after the last kick. `sep`, when given, is used to
/// track the smallest precariousness seen right after a kick.
inline KickOutcome simulate_kicks(const VectorField& field, const Vec& x0,
                                  const KickSchedule& schedule, const IntegratorConfig& cfg,
                                  const std::vector<Vec>& attractors, std::size_t home,
                                  const SeparatrixEstimate* sep = nullptr) {
  require_unit(schedule.direction);
  if (!(schedule.magnitude >= 0.0)) throw Error(ErrorCategory::Usage, "kick magnitude must be >= 0");
  if (!(schedule.period > 0.0)) throw Error(ErrorCategory::Usage, "kick period must be positive");
  if (schedule.count < 1) throw Error(ErrorCategory::Usage, "kick count must be >= 1");
  if (home >= attractors.size()) throw Error(ErrorCategory::Usage, "home attractor out of range");
  if (!settle(field, x0, cfg, attractors).settled_to(home))
    throw Error(ErrorCategory::Usage, "start state does not settle to the home attractor");

  KickOutcome out;
  Stepper stepper(field, cfg, x0);
  bool diverged = false;
  try {
    for (std::size_t k = 1; k <= schedule.count; ++k) {
      Vec x = stepper.x();
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += schedule.magnitude * schedule.direction[i];
      if (sep) {
        double d = distance_to_threshold(x, *sep).distance;
        out.min_threshold_distance = std::min(out.min_threshold_distance.value_or(d), d);
      }
      stepper.jump_to(std::move(x));
      out.kicks_applied = k;
      stepper.advance_to(static_cast<double>(k) * schedule.period, [&](const Stepper& s) {
        if (norm_inf(s.x()) > kDivergenceNorm) throw Blowup(s.t(), "divergence threshold");
      });
    }
  } catch (const Blowup&) {
    diverged = true;
  }

  if (diverged) {
    out.escaped = true;
    out.final_verdict = Verdict::Diverged;
    out.final_state = stepper.x();
    return out;
  }
  SettleResult fin = settle(field, stepper.x(), cfg, attractors);
  out.final_state = fin.final_state;
  out.final_verdict = fin.verdict;
  if (fin.verdict == Verdict::Settled)
    out.escaped = fin.attractor != home;
  else if (fin.verdict == Verdict::Diverged)
    out.escaped = true;
  return out;
}

/// Largest kick magnitude δ* that a periodic schedule (period τ, `count`
/// kicks) can apply without escape: doubling to bracket, then bisection to
/// relative tolerance 1e-3. Undecided outcomes count as escape, so the
/// returned value is the largest magnitude observed not to escape.
///
/// This is an operational proxy for the intensity of attraction, not a
/// closed-form metric.
inline double max_sustainable_kick(const VectorField& field, const Vec& x0, const Vec& direction,
                                   double period, std::size_t count, const IntegratorConfig& cfg,
                                   const std::vector<Vec>& attractors, std::size_t home) {
  auto escapes = [&](double delta) {
    KickOutcome o = simulate_kicks(field, x0, {direction, delta, period, count}, cfg, attractors,
                                   home);
    return o.escaped.value_or(true);
  };
  double lo = 0.0;
  double hi = 1e-6;
  bool found = false;
  for (int i = 0; i <= 60; ++i) {
    if (escapes(hi)) {
      found = true;
      break;
    }
    lo = hi;
    hi *= 2.0;
  }
  if (!found) throw NoEscapeFound();
  while (hi - lo > 1e-3 * hi) {
    double mid = 0.5 * (lo + hi);
    if (escapes(mid))
      hi = mid;
    else
      lo = mid;
  }
  return lo;
}

namespace detail {
inline void require_1d(const VectorField& field) {
  if (field.dim() != 1) throw Error(ErrorCategory::Usage, "operation requires a 1-D model");
}
}  // namespace detail

/// Sampled potential U with U' = -f: trapezoid rule from the left end, then
/// shifted so that min U = 0.
inline std::vector<std::pair<double, double>> potential_1d(const VectorField& field,
                                                           Interval range, std::size_t samples) {
  detail::require_1d(field);
  if (samples < 2) throw Error(ErrorCategory::Usage, "need at least two samples");
  if (!(range.hi > range.lo)) throw Error(ErrorCategory::Usage, "range must satisfy lo < hi");
  const double h = range.width() / static_cast<double>(samples - 1);
  std::vector<std::pair<double, double>> out(samples);
  double prev_f = 0.0;
  for (std::size_t i = 0; i < samples; ++i) {
    double x = i + 1 == samples ? range.hi : range.lo + h * static_cast<double>(i);
    double f = field(Vec{x})[0];
    double u = i == 0 ? 0.0 : out[i - 1].second - 0.5 * h * (prev_f + f);
    out[i] = {x, u};
    prev_f = f;
  }
  double umin = std::min_element(out.begin(), out.end(), [](const auto& a, const auto& b) {
                  return a.second < b.second;
                })->second;
  for (auto& p : out) p.second -= umin;
  return out;
}

struct SteepestPoint {
  double x_at_max = 0.0;
  double max_speed = 0.0;
};

/// Location of the fastest flow |f| strictly between two consecutive
/// equilibria: a 10^4-point scan refined by golden-section search.
inline SteepestPoint steepest_recovery_point(const VectorField& field, Interval interval) {
  detail::require_1d(field);
  double a = std::min(interval.lo, interval.hi);
  double b = std::max(interval.lo, interval.hi);
  if (!(b > a)) throw Error(ErrorCategory::Usage, "interval must have positive length");
  auto speed = [&](double x) { return std::fabs(field(Vec{x})[0]); };

  constexpr std::size_t kScan = 10000;
  const double h = (b - a) / static_cast<double>(kScan + 1);
  std::size_t best = 1;
  double best_speed = -1.0;
  for (std::size_t i = 1; i <= kScan; ++i) {
    double s = speed(a + h * static_cast<double>(i));
    if (s > best_speed) {
      best_speed = s;
      best = i;
    }
  }
  double lo = a + h * static_cast<double>(best - 1);
  double hi = a + h * static_cast<double>(best + 1);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = hi - inv_phi * (hi - lo);
  double d = lo + inv_phi * (hi - lo);
  double sc = speed(c), sd = speed(d);
  while (hi - lo > 1e-8) {
    if (sc >= sd) {
      hi = d;
      d = c;
      sd = sc;
      c = hi - inv_phi * (hi - lo);
      sc = speed(c);
    } else {
      lo = c;
      c = d;
      sc = sd;
      d = lo + inv_phi * (hi - lo);
      sd = speed(d);
    }
  }
  double x = 0.5 * (lo + hi);
  double s = speed(x);
  if (best_speed > s) return {a + h * static_cast<double>(best), best_speed};
  return {x, s};
}

/// Ratio of a constant additive forcing F·direction to the displacement of
/// the stable equilibrium it produces. Throws BasinExit when the forced
/// system, once released, no longer returns to x0.
inline double resistance_ratio(const VectorField& field, const Vec& x0,
                               const Vec& forcing_direction, double force,
                               const IntegratorConfig& cfg) {
  require_unit(forcing_direction);
  if (!(force > 0.0)) throw Error(ErrorCategory::Usage, "forcing magnitude must be positive");
  NewtonResult polished = newton(field, x0, kDefaultNewtonTol);
  if (!polished.converged || distance(polished.x, x0) > 1e-6) throw NotStable();
  const Vec home = polished.x;
  if (analyze_equilibrium(field, home).stability != Stability::Stable) throw NotStable();

  Vec forcing(forcing_direction.size());
  for (std::size_t i = 0; i < forcing.size(); ++i) forcing[i] = force * forcing_direction[i];
  RelaxResult forced = relax(field.with_forcing(std::move(forcing)), home, cfg);
  if (forced.verdict == Verdict::Diverged) throw BasinExit();
  if (forced.verdict == Verdict::Undecided)
    throw Error(ErrorCategory::Inconclusive, "forced system did not come to rest");

  RelaxResult released = relax(field, forced.state, cfg);
  if (released.verdict != Verdict::Settled || distance(released.state, home) > kDedupeDistance)
    throw BasinExit();
  return force / distance(forced.state, home);
}

namespace detail {
inline Table pair_table(std::string a, std::string b,
                        const std::vector<std::pair<double, double>>& rows) {
  Table t;
  t.header = {std::move(a), std::move(b)};
  for (const auto& [x, y] : rows) t.add_row({x, y});
  return t;
}
}  // namespace detail

/// "x,U"
inline Table landscape_table(const std::vector<std::pair<double, double>>& landscape) {
  return detail::pair_table("x", "U", landscape);
}

/// "tau,delta_star"
inline Table kick_sweep_table(const std::vector<std::pair<double, double>>& sweep) {
  return detail::pair_table("tau", "delta_star", sweep);
}

}  // namespace basinscope
