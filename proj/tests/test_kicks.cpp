#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "basinscope/kicks.hpp"

using namespace basinscope;

namespace {

const SystemModel& cubic() {
  static const SystemModel m = builtin_model("saddle_node_cubic");
  return m;
}

const double kFoldMu = 2.0 / (3.0 * std::sqrt(3.0));  // 0.3849...

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

struct CubicSetup {
  VectorField field;
  std::vector<Vec> attractors;
  std::size_t home = 0;
  Vec x0;
};

CubicSetup cubic_at(double mu) {
  VectorField f(cubic(), ParamMap{{"mu", mu}});
  double xs = cubic_root(mu, -2.0, -1.0 / std::sqrt(3.0));
  double xr = cubic_root(mu, 1.0 / std::sqrt(3.0), 2.0);
  return {f, {{xs}, {xr}}, 0, {xs}};
}

}  // namespace

TEST(SimulateKicks, Examples) {
  CubicSetup s = cubic_at(0.0);
  IntegratorConfig cfg;
  KickOutcome big = simulate_kicks(s.field, s.x0, {{1.0}, 1.5, 1.0, 1}, cfg, s.attractors, s.home);
  ASSERT_TRUE(big.escaped.has_value());
  EXPECT_TRUE(*big.escaped);
  EXPECT_EQ(big.kicks_applied, 1u);

  KickOutcome spaced = simulate_kicks(s.field, s.x0, {{1.0}, 0.5, 10.0, 10}, cfg, s.attractors, s.home);
  ASSERT_TRUE(spaced.escaped.has_value());
  EXPECT_FALSE(*spaced.escaped);
  EXPECT_EQ(spaced.kicks_applied, 10u);
  EXPECT_NEAR(spaced.final_state[0], -1.0, cfg.capture_radius);

  KickOutcome none = simulate_kicks(s.field, s.x0, {{1.0}, 0.0, 1.0, 5}, cfg, s.attractors, s.home);
  ASSERT_TRUE(none.escaped.has_value());
  EXPECT_FALSE(*none.escaped);
}

TEST(SimulateKicks, Preconditions) {
  CubicSetup s = cubic_at(0.0);
  IntegratorConfig cfg;
  EXPECT_THROW(simulate_kicks(s.field, s.x0, {{2.0}, 0.5, 1.0, 1}, cfg, s.attractors, s.home), Error);
  EXPECT_THROW(simulate_kicks(s.field, s.x0, {{1.0}, -0.5, 1.0, 1}, cfg, s.attractors, s.home), Error);
  EXPECT_THROW(simulate_kicks(s.field, s.x0, {{1.0}, 0.5, 0.0, 1}, cfg, s.attractors, s.home), Error);
  EXPECT_THROW(simulate_kicks(s.field, s.x0, {{1.0}, 0.5, 1.0, 0}, cfg, s.attractors, s.home), Error);
  EXPECT_THROW(simulate_kicks(s.field, Vec{1.0}, {{1.0}, 0.5, 1.0, 1}, cfg, s.attractors, s.home), Error);
}

TEST(SimulateKicks, TracksPrecariousnessAfterKicks) {
  CubicSetup s = cubic_at(0.0);
  BasinMap map = classify_grid(s.field, Box{{-2.0, 2.0}}, 400, IntegratorConfig{});
  SeparatrixEstimate sep = separatrix_points(map);
  KickOutcome o = simulate_kicks(s.field, s.x0, {{1.0}, 0.3, 10.0, 3}, IntegratorConfig{},
                                 s.attractors, s.home, &sep);
  ASSERT_TRUE(o.min_threshold_distance.has_value());
  // Each kick starts from (very nearly) -1 and lands at -0.7, 0.7 from the separatrix.
  EXPECT_NEAR(*o.min_threshold_distance, 0.7, map.cell_width(0));
}

TEST(MaxSustainableKick, FrequentSmallKicksMatchFoldDistance) {
  CubicSetup s = cubic_at(0.0);
  const double tau = 0.01;
  double d = max_sustainable_kick(s.field, s.x0, Vec{1.0}, tau, 10000, IntegratorConfig{},
                                  s.attractors, s.home);
  // Frequent kicks act like a constant forcing of rate delta/tau; the state is
  // lost once that rate exceeds the fold value of mu.
  EXPECT_NEAR(d / tau, kFoldMu, 0.05 * kFoldMu);
}

TEST(MaxSustainableKick, RareKicksMatchThresholdDistance) {
  CubicSetup s = cubic_at(0.0);
  double d = max_sustainable_kick(s.field, s.x0, Vec{1.0}, 50.0, 10, IntegratorConfig{},
                                  s.attractors, s.home);
  EXPECT_NEAR(d, 1.0, 0.02);
}

TEST(MaxSustainableKick, ShiftedParameter) {
  CubicSetup s = cubic_at(0.3);
  const double tau = 0.01;
  double d = max_sustainable_kick(s.field, s.x0, Vec{1.0}, tau, 10000, IntegratorConfig{},
                                  s.attractors, s.home);
  const double remaining = kFoldMu - 0.3;
  EXPECT_NEAR(d / tau, remaining, 0.1 * remaining);
}

TEST(MaxSustainableKick, MonotoneInPeriodAndBoundedByDirectionalDistance) {
  CubicSetup s = cubic_at(0.0);
  DirectionalDistance dd = directional_distance(s.field, s.x0, Vec{1.0}, IntegratorConfig{}, 10.0);
  ASSERT_EQ(dd.status, DirectionalDistance::Status::Found);
  double prev = 0.0;
  for (double tau : {0.01, 0.1, 1.0, 10.0}) {
    double d = max_sustainable_kick(s.field, s.x0, Vec{1.0}, tau, 100, IntegratorConfig{},
                                    s.attractors, s.home);
    EXPECT_GT(d, prev) << "tau=" << tau;
    EXPECT_LE(d, dd.distance * (1.0 + 1e-3)) << "tau=" << tau;
    prev = d;
  }
}

TEST(MaxSustainableKick, GlobalAttractorEscapesOnlyByDivergence) {
  SystemModel decay("decay", {"x"}, {}, {"-x"});
  VectorField f(decay, Vec{});
  // No other basin exists, so the only way out is a kick past the divergence norm.
  double d = max_sustainable_kick(f, Vec{0.0}, Vec{1.0}, 1.0, 1, IntegratorConfig{}, {{0.0}}, 0);
  EXPECT_GT(d, 0.5 * kDivergenceNorm);
  EXPECT_LE(d, kDivergenceNorm * 1.01);
}

TEST(Potential, WellDepth) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  auto u = potential_1d(f, Interval{-2.0, 2.0}, 4001);
  ASSERT_EQ(u.size(), 4001u);
  EXPECT_EQ(u.front().first, -2.0);
  EXPECT_EQ(u.back().first, 2.0);
  auto at = [&](double x) {
    for (const auto& [xi, ui] : u)
      if (std::fabs(xi - x) < 1e-9) return ui;
    ADD_FAILURE() << "no sample at " << x;
    return 0.0;
  };
  // U = x^4/4 - x^2/2 + c.
  EXPECT_NEAR(at(-1.0) - at(0.0), -0.25, 1e-4);
  double umin = INFINITY;
  for (const auto& p : u) umin = std::min(umin, p.second);
  EXPECT_EQ(umin, 0.0);
}

TEST(Potential, SlopeMatchesFlowSpeed) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  auto u = potential_1d(f, Interval{-1.0, 0.0}, 4001);
  double max_slope = 0.0;
  for (std::size_t i = 1; i < u.size(); ++i)
    max_slope = std::max(max_slope, std::fabs((u[i].second - u[i - 1].second) /
                                              (u[i].first - u[i - 1].first)));
  SteepestPoint sp = steepest_recovery_point(f, Interval{-1.0, 0.0});
  EXPECT_NEAR(max_slope, sp.max_speed, 1e-3);
}

TEST(Potential, Preconditions) {
  VectorField f(cubic(), ParamMap{});
  EXPECT_THROW(potential_1d(f, Interval{1.0, -1.0}, 10), Error);
  EXPECT_THROW(potential_1d(f, Interval{-1.0, 1.0}, 1), Error);
  const SystemModel well = builtin_model("double_well_2d");
  EXPECT_THROW(potential_1d(VectorField(well, Vec{}), Interval{-1.0, 1.0}, 10), Error);
}

TEST(SteepestPoint, CubicBetweenStableAndSaddle) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  SteepestPoint sp = steepest_recovery_point(f, Interval{-1.0, 0.0});
  EXPECT_NEAR(sp.x_at_max, -1.0 / std::sqrt(3.0), 1e-6);
  EXPECT_NEAR(sp.max_speed, kFoldMu, 1e-6);
  // Interval orientation does not matter.
  SteepestPoint rev = steepest_recovery_point(f, Interval{0.0, -1.0});
  EXPECT_NEAR(rev.x_at_max, sp.x_at_max, 1e-9);
}

TEST(SteepestPoint, ShiftedParameter) {
  VectorField f(cubic(), ParamMap{{"mu", 0.3}});
  double xs = cubic_root(0.3, -2.0, -0.6), xu = cubic_root(0.3, -0.6, 0.0);
  SteepestPoint sp = steepest_recovery_point(f, Interval{xs, xu});
  EXPECT_NEAR(sp.x_at_max, -1.0 / std::sqrt(3.0), 1e-6);
  EXPECT_NEAR(sp.max_speed, kFoldMu - 0.3, 1e-6);
}

TEST(Resistance, LinearIsStiffness) {
  const SystemModel lin = builtin_model("linear_1d");
  VectorField f(lin, ParamMap{{"mu", 0.0}, {"k", 2.0}});
  EXPECT_NEAR(resistance_ratio(f, Vec{0.0}, Vec{1.0}, 0.1, IntegratorConfig{}), 2.0, 1e-6);
  EXPECT_NEAR(resistance_ratio(f, Vec{0.0}, Vec{-1.0}, 0.7, IntegratorConfig{}), 2.0, 1e-6);
}

TEST(Resistance, CubicApproachesCurvature) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  IntegratorConfig cfg;
  // Forced equilibrium solves 0.1 + x - x^3 = 0; the response is already
  // noticeably nonlinear at this forcing.
  const double xf = cubic_root(0.1, -2.0, -1.0 / std::sqrt(3.0));
  EXPECT_NEAR(resistance_ratio(f, Vec{-1.0}, Vec{1.0}, 0.1, cfg), 0.1 / (xf + 1.0), 1e-6);
  EXPECT_NEAR(resistance_ratio(f, Vec{-1.0}, Vec{1.0}, 1e-3, cfg), 2.0, 0.01 * 2.0);
  EXPECT_THROW(resistance_ratio(f, Vec{-1.0}, Vec{1.0}, 0.5, cfg), BasinExit);
}

TEST(Resistance, Preconditions) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  EXPECT_THROW(resistance_ratio(f, Vec{0.0}, Vec{1.0}, 0.1, IntegratorConfig{}), NotStable);
  EXPECT_THROW(resistance_ratio(f, Vec{-0.5}, Vec{1.0}, 0.1, IntegratorConfig{}), NotStable);
  EXPECT_THROW(resistance_ratio(f, Vec{-1.0}, Vec{1.0}, 0.0, IntegratorConfig{}), Error);
}

TEST(KickTables, Headers) {
  std::ostringstream a, b;
  write_csv(a, landscape_table({{0.0, 1.5}}));
  write_csv(b, kick_sweep_table({{0.01, 0.0038}}));
  EXPECT_EQ(a.str(), "x,U\n0,1.5\n");
  EXPECT_EQ(b.str(), "tau,delta_star\n0.01,0.0038\n");
}
