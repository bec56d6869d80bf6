#pragma once

// Random expression trees and the finite-difference derivative oracle,
// shared by the expr tests and the acceptance runner.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "basinscope/expr.hpp"

namespace basinscope::testing_support {

inline double eval_at(const Expr& e, double x, double y = 0.0, double mu = 0.0) {
  std::vector<double> s{x, y};
  std::vector<double> p{mu};
  return eval(e, std::span<const double>(s), std::span<const double>(p));
}

inline double central_fd(const Expr& e, double x, double y, double mu, double h = 1e-5) {
  return (eval_at(e, x + h, y, mu) - eval_at(e, x - h, y, mu)) / (2.0 * h);
}

// Trees over x, y (states) and mu (param).
class RandomExpr {
 public:
  explicit RandomExpr(std::uint32_t seed) : rng_(seed) {}

  Expr make(int depth) {
    std::uniform_int_distribution<int> pick(0, depth <= 0 ? 3 : 11);
    switch (pick(rng_)) {
      case 0: return Expr::state_var("x", 0);
      case 1: return Expr::state_var("y", 1);
      case 2: return Expr::param("mu", 0);
      case 3: return Expr::constant(std::uniform_real_distribution<double>(-3.0, 3.0)(rng_));
      case 4: return Expr::add(make(depth - 1), make(depth - 1));
      case 5: return Expr::sub(make(depth - 1), make(depth - 1));
      case 6: return Expr::mul(make(depth - 1), make(depth - 1));
      case 7: return Expr::div(make(depth - 1), make(depth - 1));
      case 8: {
        static const double exps[] = {2.0, 3.0, -1.0, 0.5, 1.5, -2.0};
        return Expr::pow(make(depth - 1), exps[std::uniform_int_distribution<int>(0, 5)(rng_)]);
      }
      case 9: return Expr::neg(make(depth - 1));
      default: {
        static const Func fs[] = {Func::Sin, Func::Cos, Func::Exp, Func::Ln, Func::Tanh, Func::Sqrt};
        return Expr::func(fs[std::uniform_int_distribution<int>(0, 5)(rng_)], make(depth - 1));
      }
    }
  }

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

 private:
  std::mt19937 rng_;
};

struct FdSample {
  Expr expr;
  double x = 0, y = 0, mu = 0;
  double symbolic = 0, fd = 0;
  double rel_err() const { return std::fabs(symbolic - fd) / std::max(1.0, std::fabs(fd)); }
};

/// Draws expressions and points until `count` lie in the safe domain, i.e.
/// values stay finite and below 1e3 near the point, and the function is
/// smooth enough there for a central difference to be trusted (coarse and
/// fine differences agree to 1e-2).
inline std::vector<FdSample> fd_samples(std::uint32_t seed, int count, int max_attempts = 200000) {
  RandomExpr gen(seed);
  std::vector<FdSample> out;
  for (int attempts = 0; static_cast<int>(out.size()) < count && attempts < max_attempts; ++attempts) {
    FdSample s;
    s.expr = gen.make(4);
    s.x = gen.uniform(-2.0, 2.0);
    s.y = gen.uniform(-2.0, 2.0);
    s.mu = gen.uniform(-1.0, 1.0);
    try {
      bool safe = true;
      for (double dx : {-1e-3, -1e-5, 0.0, 1e-5, 1e-3})
        if (std::fabs(eval_at(s.expr, s.x + dx, s.y, s.mu)) > 1e3) safe = false;
      if (!safe) continue;
      s.fd = central_fd(s.expr, s.x, s.y, s.mu);
      double coarse = central_fd(s.expr, s.x, s.y, s.mu, 1e-3);
      if (std::fabs(coarse - s.fd) > 1e-2 * std::max(1.0, std::fabs(s.fd))) continue;
      s.symbolic = eval_at(differentiate(s.expr, "x"), s.x, s.y, s.mu);
    } catch (const DomainError&) {
      continue;
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace basinscope::testing_support
