#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "format.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "table.hpp"

namespace basinscope {

enum class Method { Rk4Fixed, Rk45Adaptive };

struct IntegratorConfig {
  Method method = Method::Rk45Adaptive;
  double dt = 0.01;  // fixed step (rk4) or initial step (rk45)
  double rtol = 1e-8;
  double atol = 1e-10;
  double t_max = 1000.0;
  double capture_radius = 1e-4;

  void validate() const {
    if (!(dt > 0.0)) throw Error(ErrorCategory::Usage, "integrator dt must be positive");
    if (!(t_max > 0.0)) throw Error(ErrorCategory::Usage, "integrator t_max must be positive");
    if (!(capture_radius > 0.0))
      throw Error(ErrorCategory::Usage, "capture radius must be positive");
    if (method == Method::Rk45Adaptive && !(rtol > 0.0 || atol > 0.0))
      throw Error(ErrorCategory::Usage, "adaptive tolerances must not both be zero");
  }
};

/// ‖x‖∞ beyond this counts as escape to infinity.
inline constexpr double kDivergenceNorm = 1e6;

struct Trajectory {
  std::vector<double> times;
  std::vector<Vec> states;

  std::size_t size() const { return times.size(); }
  const Vec& back() const { return states.back(); }
};

/// Non-finite state or collapsed step size. Carries the trajectory computed
/// up to the failure.
class Blowup : public Error {
 public:
  Blowup(double t, const std::string& detail, Trajectory prefix = {})
      : Error(ErrorCategory::Numerical,
              "blow-up at t=" + format_sig9(t) + (detail.empty() ? "" : ": " + detail)),
        t_(t),
        detail_(detail),
        prefix_(std::move(prefix)) {}
  double time() const { return t_; }
  const std::string& detail() const { return detail_; }
  const Trajectory& prefix() const { return prefix_; }

 private:
  double t_;
  std::string detail_;
  Trajectory prefix_;
};

/// Single-trajectory time stepper shared by every integration-based operation.
class Stepper {
 public:
  Stepper(const VectorField& field, const IntegratorConfig& cfg, Vec x0, double t0 = 0.0)
      : field_(&field), cfg_(cfg), x_(std::move(x0)), t_(t0), h_(cfg.dt) {
    const std::size_t n = x_.size();
    for (auto& k : k_) k.resize(n);
    tmp_.resize(n);
    xnew_.resize(n);
  }

  double t() const { return t_; }
  const Vec& x() const { return x_; }

  /// Replaces the state in place (an impulsive jump); time is unchanged.
  void jump_to(Vec x) {
    x_ = std::move(x);
    fsal_valid_ = false;
  }

  /// Advances by one accepted step without passing `t_stop`.
  void step(double t_stop) {
    if (cfg_.method == Method::Rk4Fixed)
      step_rk4(t_stop);
    else
      step_rk45(t_stop);
  }

  /// Steps until `t_stop` is reached exactly.
  template <typename OnStep>
  void advance_to(double t_stop, OnStep&& on_step) {
    while (t_ < t_stop) {
      step(t_stop);
      on_step(*this);
    }
  }

 private:
  static double h_floor(double t) {
    return 16.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::fabs(t));
  }

  // Lands exactly on t_stop when within rounding of it.
  double finish_time(double t_new, double t_stop) const {
    return std::fabs(t_stop - t_new) <= h_floor(t_stop) ? t_stop : t_new;
  }

  void eval_into(const Vec& x, Vec& out) { (*field_)(x, out); }

  void step_rk4(double t_stop) {
    const std::size_t n = x_.size();
    double h = std::min(cfg_.dt, t_stop - t_);
    auto& [k1, k2, k3, k4, k5, k6, k7] = k_;
    try {
      eval_into(x_, k1);
      for (std::size_t i = 0; i < n; ++i) tmp_[i] = x_[i] + 0.5 * h * k1[i];
      eval_into(tmp_, k2);
      for (std::size_t i = 0; i < n; ++i) tmp_[i] = x_[i] + 0.5 * h * k2[i];
      eval_into(tmp_, k3);
      for (std::size_t i = 0; i < n; ++i) tmp_[i] = x_[i] + h * k3[i];
      eval_into(tmp_, k4);
    } catch (const DomainError& e) {
      throw Blowup(t_, e.what());
    }
    for (std::size_t i = 0; i < n; ++i) {
      x_[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      if (!std::isfinite(x_[i])) throw Blowup(t_ + h, "non-finite state");
    }
    t_ = finish_time(t_ + h, t_stop);
  }

  void step_rk45(double t_stop) {
    // Dormand-Prince 5(4) tableau.
    static constexpr double a21 = 1.0 / 5;
    static constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
    static constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
    static constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                            a54 = -212.0 / 729;
    static constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                            a64 = 49.0 / 176, a65 = -5103.0 / 18656;
    static constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                            b5 = -2187.0 / 6784, b6 = 11.0 / 84;
    static constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920,
                            e5 = -17253.0 / 339200, e6 = 22.0 / 525, e7 = -1.0 / 40;

    const std::size_t n = x_.size();
    auto& [k1, k2, k3, k4, k5, k6, k7] = k_;
    std::string last_failure = "step size collapsed";
    if (!fsal_valid_) {
      try {
        eval_into(x_, k1);
      } catch (const DomainError& e) {
        throw Blowup(t_, e.what());
      }
      fsal_valid_ = true;
    }
    for (;;) {
      const double remaining = t_stop - t_;
      const bool truncated = h_ >= remaining;
      const double h = truncated ? remaining : h_;
      if (h < h_floor(t_) && !truncated) throw Blowup(t_, last_failure);

      double err = 0.0;
      bool ok = true;
      try {
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x_[i] + h * a21 * k1[i];
        eval_into(tmp_, k2);
        for (std::size_t i = 0; i < n; ++i) tmp_[i] = x_[i] + h * (a31 * k1[i] + a32 * k2[i]);
        eval_into(tmp_, k3);
        for (std::size_t i = 0; i < n; ++i)
          tmp_[i] = x_[i] + h * (a41 * k1[i] + a42 * k2[i] + a43 * k3[i]);
        eval_into(tmp_, k4);
        for (std::size_t i = 0; i < n; ++i)
          tmp_[i] = x_[i] + h * (a51 * k1[i] + a52 * k2[i] + a53 * k3[i] + a54 * k4[i]);
        eval_into(tmp_, k5);
        for (std::size_t i = 0; i < n; ++i)
          tmp_[i] = x_[i] + h * (a61 * k1[i] + a62 * k2[i] + a63 * k3[i] + a64 * k4[i] +
                                 a65 * k5[i]);
        eval_into(tmp_, k6);
        for (std::size_t i = 0; i < n; ++i)
          xnew_[i] = x_[i] + h * (b1 * k1[i] + b3 * k3[i] + b4 * k4[i] + b5 * k5[i] + b6 * k6[i]);
        eval_into(xnew_, k7);
        for (std::size_t i = 0; i < n; ++i) {
          double ei = h * (e1 * k1[i] + e3 * k3[i] + e4 * k4[i] + e5 * k5[i] + e6 * k6[i] +
                           e7 * k7[i]);
          double sc = cfg_.atol + cfg_.rtol * std::max(std::fabs(x_[i]), std::fabs(xnew_[i]));
          double r = sc > 0.0 ? std::fabs(ei) / sc : (ei == 0.0 ? 0.0 : HUGE_VAL);
          if (!std::isfinite(xnew_[i]) || !std::isfinite(ei)) {
            ok = false;
            last_failure = "non-finite state";
            break;
          }
          err = std::max(err, r);
        }
      } catch (const DomainError& e) {
        ok = false;
        last_failure = e.what();
      }

      if (!ok) {
        if (h <= h_floor(t_)) throw Blowup(t_, last_failure);
        h_ = h * 0.25;
        continue;
      }
      if (err <= 1.0) {
        double fac = err == 0.0 ? 5.0 : std::clamp(0.9 * std::pow(err, -0.2), 0.2, 5.0);
        std::swap(x_, xnew_);
        std::swap(k1, k7);
        t_ = truncated ? t_stop : finish_time(t_ + h, t_stop);
        h_ = truncated ? std::max(h_, h * fac) : h * fac;
        return;
      }
      h_ = h * std::clamp(0.9 * std::pow(err, -0.2), 0.2, 1.0);
      if (h_ < h_floor(t_)) throw Blowup(t_, "step size collapsed");
    }
  }

  const VectorField* field_;
  IntegratorConfig cfg_;
  Vec x_;
  double t_;
  double h_;
  bool fsal_valid_ = false;
  std::array<Vec, 7> k_;
  Vec tmp_, xnew_;
};

/// Integrates from t = 0 to `t_end`, recording every accepted step.
inline Trajectory integrate(const VectorField& field, const Vec& x0, const IntegratorConfig& cfg,
                            double t_end) {
  cfg.validate();
  if (x0.size() != field.dim())
    throw Error(ErrorCategory::Usage, "initial state has wrong dimension");
  for (double v : x0)
    if (!std::isfinite(v)) throw Error(ErrorCategory::Usage, "initial state must be finite");
  if (!(t_end > 0.0) || t_end > cfg.t_max)
    throw Error(ErrorCategory::Usage, "t_end must lie in (0, t_max]");

  Trajectory traj;
  traj.times.push_back(0.0);
  traj.states.push_back(x0);
  Stepper stepper(field, cfg, x0);
  try {
    stepper.advance_to(t_end, [&](const Stepper& s) {
      traj.times.push_back(s.t());
      traj.states.push_back(s.x());
    });
  } catch (const Blowup& b) {
    throw Blowup(b.time(), b.detail(), std::move(traj));
  }
  return traj;
}

inline Trajectory integrate(const SystemModel& m, const Vec& x0, const ParamMap& overrides,
                            const IntegratorConfig& cfg, double t_end) {
  return integrate(VectorField(m, overrides), x0, cfg, t_end);
}

enum class Verdict { Settled, Diverged, Undecided };

inline const char* verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Settled: return "settled";
    case Verdict::Diverged: return "diverged";
    case Verdict::Undecided: return "undecided";
  }
  return "?";
}

struct SettleResult {
  Verdict verdict = Verdict::Undecided;
  std::size_t attractor = 0;  // meaningful only when Settled
  Vec final_state;
  double elapsed = 0.0;

  bool settled_to(std::size_t index) const {
    return verdict == Verdict::Settled && attractor == index;
  }
};

namespace detail {
inline std::optional<std::size_t> captured_by(const Vec& x, const std::vector<Vec>& attractors,
                                              double radius) {
  for (std::size_t i = 0; i < attractors.size(); ++i)
    if (distance(x, attractors[i]) <= radius) return i;
  return std::nullopt;
}
}  // namespace detail

/// Runs forward until the state is captured by one of `attractors`, escapes
/// to infinity, or the horizon t_max passes.
inline SettleResult settle(const VectorField& field, const Vec& x0, const IntegratorConfig& cfg,
                           const std::vector<Vec>& attractors) {
  cfg.validate();
  SettleResult out;
  out.final_state = x0;
  if (auto hit = detail::captured_by(x0, attractors, cfg.capture_radius)) {
    out.verdict = Verdict::Settled;
    out.attractor = *hit;
    return out;
  }
  Stepper stepper(field, cfg, x0);
  try {
    while (stepper.t() < cfg.t_max) {
      stepper.step(cfg.t_max);
      const Vec& x = stepper.x();
      if (norm_inf(x) > kDivergenceNorm) {
        out.verdict = Verdict::Diverged;
        out.final_state = x;
        out.elapsed = stepper.t();
        return out;
      }
      if (auto hit = detail::captured_by(x, attractors, cfg.capture_radius)) {
        out.verdict = Verdict::Settled;
        out.attractor = *hit;
        out.final_state = x;
        out.elapsed = stepper.t();
        return out;
      }
    }
  } catch (const Blowup& b) {
    out.verdict = Verdict::Diverged;
    out.final_state = stepper.x();
    out.elapsed = b.time();
    return out;
  }
  out.verdict = Verdict::Undecided;
  out.final_state = stepper.x();
  out.elapsed = stepper.t();
  return out;
}

inline SettleResult settle(const SystemModel& m, const Vec& x0, const ParamMap& overrides,
                           const IntegratorConfig& cfg, const std::vector<Vec>& attractors) {
  return settle(VectorField(m, overrides), x0, cfg, attractors);
}

/// Trajectory table: "t,<state names>", one row per accepted step.
inline Table trajectory_table(const SystemModel& m, const Trajectory& traj) {
  Table t;
  t.header.push_back("t");
  for (const auto& s : m.state()) t.header.push_back(s);
  for (std::size_t i = 0; i < traj.size(); ++i) {
    std::vector<Cell> row{traj.times[i]};
    for (double v : traj.states[i]) row.emplace_back(v);
    t.add_row(std::move(row));
  }
  return t;
}

}  // namespace basinscope
