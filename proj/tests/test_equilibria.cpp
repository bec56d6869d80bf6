#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "basinscope/equilibria.hpp"

using namespace basinscope;

namespace {

const Box kCubicBox{{-2.0, 2.0}};

// Real root of x^3 - x - mu = 0 in [lo, hi] by plain bisection.
double cubic_root(double mu, double lo, double hi) {
  auto g = [&](double x) { return mu + x - x * x * x; };
  for (int i = 0; i < 200; ++i) {
    double mid = 0.5 * (lo + hi);
    if ((g(lo) < 0) == (g(mid) < 0))
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

// Roots of det(A - t I) for symmetric 3x3 A: sign-change scan + bisection.
std::vector<double> char_poly_roots(const Matrix& a) {
  auto det3 = [&](double t) {
    double m00 = a(0, 0) - t, m11 = a(1, 1) - t, m22 = a(2, 2) - t;
    return m00 * (m11 * m22 - a(1, 2) * a(2, 1)) - a(0, 1) * (a(1, 0) * m22 - a(1, 2) * a(2, 0)) +
           a(0, 2) * (a(1, 0) * a(2, 1) - m11 * a(2, 0));
  };
  double bound = 0.0;
  for (std::size_t i = 0; i < 3; ++i)
    bound = std::max(bound, std::fabs(a(i, 0)) + std::fabs(a(i, 1)) + std::fabs(a(i, 2)));
  bound += 1.0;
  std::vector<double> roots;
  const int n = 200000;
  double prev_t = -bound, prev_v = det3(prev_t);
  for (int k = 1; k <= n; ++k) {
    double t = -bound + 2.0 * bound * k / n;
    double v = det3(t);
    if (v == 0.0) {
      roots.push_back(t);
    } else if ((prev_v < 0) != (v < 0) && prev_v != 0.0) {
      double lo = prev_t, hi = t;
      for (int i = 0; i < 100; ++i) {
        double mid = 0.5 * (lo + hi);
        if ((det3(lo) < 0) == (det3(mid) < 0))
          lo = mid;
        else
          hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    prev_t = t;
    prev_v = v;
  }
  return roots;
}

}  // namespace

TEST(Jacobian, Examples) {
  SystemModel cubic = builtin_model("saddle_node_cubic");
  EXPECT_DOUBLE_EQ(jacobian(cubic, Vec{-1.0}, ParamMap{{"mu", 0.0}})(0, 0), -2.0);
  EXPECT_DOUBLE_EQ(jacobian(cubic, Vec{0.0}, ParamMap{})(0, 0), 1.0);
  Matrix j = jacobian(builtin_model("double_well_2d"), Vec{1.0, 0.0}, ParamMap{});
  EXPECT_TRUE(j == (Matrix{{-8.0, 0.0}, {0.0, -2.0}}));
  EXPECT_THROW(jacobian(cubic, Vec{INFINITY}, ParamMap{}), Error);
}

TEST(Eigenvalues, Examples) {
  auto ev = eigenvalues(Matrix{{-2.0}});
  ASSERT_EQ(ev.size(), 1u);
  EXPECT_EQ(ev[0], std::complex<double>(-2.0, 0.0));

  ev = eigenvalues(Matrix{{0.0, 1.0}, {-1.0, 0.0}});
  ASSERT_EQ(ev.size(), 2u);
  EXPECT_NEAR(ev[0].real(), 0.0, 1e-15);
  EXPECT_NEAR(std::fabs(ev[0].imag()), 1.0, 1e-15);
  EXPECT_NEAR(ev[0].imag(), -ev[1].imag(), 1e-15);

  ev = eigenvalues(Matrix{{-8.0, 0.0}, {0.0, -2.0}});
  EXPECT_DOUBLE_EQ(ev[0].real(), -2.0);
  EXPECT_DOUBLE_EQ(ev[1].real(), -8.0);
}

TEST(Eigenvalues, RandomSymmetric3x3MatchCharacteristicPolynomial) {
  std::mt19937 rng(99);
  std::uniform_real_distribution<double> U(-5.0, 5.0);
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(3, 3);
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = i; j < 3; ++j) a(i, j) = a(j, i) = U(rng);
    auto ev = eigenvalues(a);
    auto oracle = char_poly_roots(a);
    ASSERT_EQ(oracle.size(), 3u) << "oracle missed a root";
    std::vector<double> got;
    for (auto& l : ev) {
      EXPECT_NEAR(l.imag(), 0.0, 1e-8);
      got.push_back(l.real());
    }
    std::sort(got.begin(), got.end());
    std::sort(oracle.begin(), oracle.end());
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(got[k], oracle[k], 1e-8);
  }
}

TEST(Eigenvalues, LargerNonSymmetric) {
  // Companion matrix of (t-1)(t-2)(t-3)(t+1)(t^2+1): roots 3,2,1,-1,+-i.
  std::vector<double> p{1.0};  // coefficients, highest first
  auto mul = [&](std::vector<double> q) {
    std::vector<double> r(p.size() + q.size() - 1, 0.0);
    for (std::size_t i = 0; i < p.size(); ++i)
      for (std::size_t j = 0; j < q.size(); ++j) r[i + j] += p[i] * q[j];
    p = r;
  };
  mul({1, -1});
  mul({1, -2});
  mul({1, -3});
  mul({1, 1});
  mul({1, 0, 1});
  const std::size_t n = p.size() - 1;
  Matrix c(n, n);
  for (std::size_t j = 0; j < n; ++j) c(0, j) = -p[j + 1];
  for (std::size_t i = 1; i < n; ++i) c(i, i - 1) = 1.0;
  auto ev = eigenvalues(c);
  ASSERT_EQ(ev.size(), n);
  EXPECT_NEAR(ev[0].real(), 3.0, 1e-8);
  EXPECT_NEAR(ev[1].real(), 2.0, 1e-8);
  EXPECT_NEAR(ev[2].real(), 1.0, 1e-8);
  EXPECT_NEAR(ev[3].real(), 0.0, 1e-8);
  EXPECT_NEAR(ev[3].imag(), 1.0, 1e-8);
  EXPECT_NEAR(ev[4].imag(), -1.0, 1e-8);
  EXPECT_NEAR(ev[5].real(), -1.0, 1e-8);
}

TEST(Classify, Rules) {
  using C = std::complex<double>;
  EXPECT_EQ(classify_stability({C(-1, 0), C(-2, 0)}), Stability::Stable);
  EXPECT_EQ(classify_stability({C(-1, 0), C(2, 0)}), Stability::Saddle);
  EXPECT_EQ(classify_stability({C(1, 1), C(1, -1)}), Stability::Unstable);
  EXPECT_EQ(classify_stability({C(0, 1), C(0, -1)}), Stability::Marginal);
  EXPECT_EQ(classify_stability({C(-1, 0), C(5e-7, 0)}), Stability::Marginal);
}

TEST(FindEquilibria, CubicAtZero) {
  auto eqs = find_equilibria(builtin_model("saddle_node_cubic"), ParamMap{{"mu", 0.0}}, kCubicBox, 21);
  ASSERT_EQ(eqs.size(), 3u);
  EXPECT_NEAR(eqs[0].state[0], -1.0, 1e-8);
  EXPECT_NEAR(eqs[1].state[0], 0.0, 1e-8);
  EXPECT_NEAR(eqs[2].state[0], 1.0, 1e-8);
  EXPECT_EQ(eqs[0].stability, Stability::Stable);
  EXPECT_EQ(eqs[1].stability, Stability::Unstable);
  EXPECT_EQ(eqs[2].stability, Stability::Stable);
}

TEST(FindEquilibria, CubicAtPointThreeMatchesBisectionOracle) {
  auto eqs = find_equilibria(builtin_model("saddle_node_cubic"), ParamMap{{"mu", 0.3}}, kCubicBox, 21);
  ASSERT_EQ(eqs.size(), 3u);
  EXPECT_NEAR(eqs[0].state[0], cubic_root(0.3, -2.0, -0.6), 1e-9);
  EXPECT_NEAR(eqs[1].state[0], cubic_root(0.3, -0.6, 0.0), 1e-9);
  EXPECT_NEAR(eqs[2].state[0], cubic_root(0.3, 0.6, 2.0), 1e-9);
  EXPECT_NEAR(eqs[0].state[0], -0.786, 1e-3);
  // The middle root is -0.33894 (the oracle above), i.e. -0.339 to 3 places.
  EXPECT_NEAR(eqs[1].state[0], -0.339, 1e-3);
  EXPECT_NEAR(eqs[2].state[0], 1.125, 1e-3);
  EXPECT_EQ(eqs[1].stability, Stability::Unstable);
}

TEST(FindEquilibria, PastFoldSingleRoot) {
  auto eqs = find_equilibria(builtin_model("saddle_node_cubic"), ParamMap{{"mu", 1.0}}, kCubicBox, 21);
  ASSERT_EQ(eqs.size(), 1u);
  EXPECT_EQ(eqs[0].stability, Stability::Stable);
}

TEST(FindEquilibria, ResidualsAndDoubleWell) {
  SystemModel m = builtin_model("double_well_2d");
  auto eqs = find_equilibria(m, ParamMap{}, Box{{-2, 2}, {-2, 2}}, 11);
  ASSERT_EQ(eqs.size(), 3u);
  VectorField f(m, ParamMap{});
  for (const auto& e : eqs) EXPECT_LT(norm_inf(f(e.state)), kDefaultNewtonTol);
  EXPECT_EQ(eqs[0].stability, Stability::Stable);
  EXPECT_EQ(eqs[1].stability, Stability::Saddle);
  EXPECT_EQ(eqs[2].stability, Stability::Stable);
}

TEST(FindEquilibria, Preconditions) {
  SystemModel m = builtin_model("saddle_node_cubic");
  EXPECT_THROW(find_equilibria(m, ParamMap{}, Box{{1.0, 1.0}}, 5), Error);
  EXPECT_THROW(find_equilibria(m, ParamMap{}, kCubicBox, 1), Error);
  EXPECT_THROW(find_equilibria(m, ParamMap{}, Box{{-1, 1}, {-1, 1}}, 5), Error);
  // No roots in the box is a valid empty result.
  EXPECT_TRUE(find_equilibria(m, ParamMap{}, Box{{3.0, 4.0}}, 5).empty());
}

TEST(ReturnTime, Examples) {
  auto eqs = find_equilibria(builtin_model("saddle_node_cubic"), ParamMap{}, kCubicBox, 21);
  ReturnTime rt = return_time(eqs[0]);
  EXPECT_NEAR(rt.time, 0.5, 1e-12);
  EXPECT_NEAR(rt.pimm_resilience, 2.0, 1e-12);
  EXPECT_THROW(return_time(eqs[1]), NotStable);
  auto dw = find_equilibria(builtin_model("double_well_2d"), ParamMap{}, Box{{-2, 2}, {-2, 2}}, 11);
  EXPECT_NEAR(return_time(dw[2]).time, 0.5, 1e-12);
}

TEST(StableEquilibria, SmallPerturbationReturns) {
  SystemModel m = builtin_model("double_well_2d");
  VectorField f(m, ParamMap{});
  auto attr = stable_only(find_equilibria(f, Box{{-2, 2}, {-2, 2}}, 11));
  std::mt19937 rng(5);
  std::normal_distribution<double> N(0.0, 1.0);
  for (const auto& a : attr) {
    for (int k = 0; k < 10; ++k) {
      Vec d{N(rng), N(rng)};
      double n = norm2(d);
      Vec x0{a.state[0] + 1e-6 * d[0] / n, a.state[1] + 1e-6 * d[1] / n};
      Trajectory tr = integrate(f, x0, IntegratorConfig{}, 20.0);
      EXPECT_LE(distance(tr.back(), a.state), IntegratorConfig{}.capture_radius);
    }
  }
}

TEST(StableEquilibria, EmpiricalRecoveryMatchesEigenvalue) {
  const SystemModel cubic = builtin_model("saddle_node_cubic");
  VectorField f(cubic, ParamMap{{"mu", 0.0}});
  Equilibrium eq = analyze_equilibrium(f, Vec{-1.0});
  IntegratorConfig cfg;
  cfg.method = Method::Rk4Fixed;
  cfg.dt = 1e-4;
  const double d0 = 1e-3;
  Trajectory tr = integrate(f, Vec{-1.0 + d0}, cfg, 2.0);
  double t_e = -1.0;
  for (std::size_t i = 0; i < tr.size(); ++i)
    if (std::fabs(tr.states[i][0] + 1.0) <= d0 / std::exp(1.0)) {
      t_e = tr.times[i];
      break;
    }
  ASSERT_GT(t_e, 0.0);
  EXPECT_NEAR(t_e, return_time(eq).time, 0.1 * return_time(eq).time);
}

TEST(Relax, FindsStableRestingPoint) {
  const SystemModel cubic = builtin_model("saddle_node_cubic");
  VectorField f(cubic, ParamMap{{"mu", 0.0}});
  RelaxResult r = relax(f, Vec{0.3}, IntegratorConfig{});
  ASSERT_EQ(r.verdict, Verdict::Settled);
  EXPECT_NEAR(r.state[0], 1.0, 1e-12);
  IntegratorConfig short_cfg;
  short_cfg.t_max = 20.0;
  EXPECT_EQ(relax(f, Vec{0.0}, short_cfg).verdict, Verdict::Undecided);
}

TEST(EquilibriaTable, Csv) {
  SystemModel m = builtin_model("saddle_node_cubic");
  auto eqs = find_equilibria(m, ParamMap{}, kCubicBox, 21);
  std::ostringstream os;
  write_csv(os, equilibria_table(m, eqs));
  EXPECT_EQ(os.str(),
            "x,stability,weakest_real,return_time\n"
            "-1,Stable,-2,0.5\n"
            "0,Unstable,1,\n"
            "1,Stable,-2,0.5\n");
}
