// Acceptance runner: one PASS/FAIL line per criterion, nonzero exit if any fail.

#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "basinscope.hpp"
#include "basinscope/cli.hpp"
#include "support/random_expr.hpp"

using namespace basinscope;

namespace {

const double kFoldMu = 2.0 / (3.0 * std::sqrt(3.0));
const double kFoldX = 1.0 / std::sqrt(3.0);

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

// Collects failure notes for one criterion.
struct Check {
  std::vector<std::string> notes;
  void require(bool ok, const std::string& what) {
    if (!ok) notes.push_back(what);
  }
  void near(double got, double want, double tol, const std::string& what) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%s: got %.10g, want %.10g +/- %.3g", what.c_str(), got, want, tol);
    require(std::fabs(got - want) <= tol, buf);
  }
};

std::string fmt(double v) { return format_sig9(v); }

const SystemModel& cubic() {
  static const SystemModel m = builtin_model("saddle_node_cubic");
  return m;
}

// ---------------------------------------------------------------------------

std::string criterion1(Check& c) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  auto eqs = find_equilibria(f, Box{{-2.0, 2.0}}, kDefaultSeedsPerAxis);
  c.require(eqs.size() == 3, "expected 3 equilibria, got " + std::to_string(eqs.size()));
  if (eqs.size() != 3) return "";
  const double want[3] = {-1.0, 0.0, 1.0};
  const Stability kinds[3] = {Stability::Stable, Stability::Unstable, Stability::Stable};
  for (int i = 0; i < 3; ++i) {
    c.near(eqs[i].state[0], want[i], 1e-8, "root " + std::to_string(i));
    c.require(eqs[i].stability == kinds[i], std::string("classification of root ") + std::to_string(i));
  }
  return "roots " + fmt(eqs[0].state[0]) + ", " + fmt(eqs[1].state[0]) + ", " + fmt(eqs[2].state[0]);
}

std::string criterion2(Check& c) {
  VectorField f(cubic(), ParamMap{});
  Branch lo = continue_branch(f, 0, 0.0, 1.0, 0.01, Vec{-1.0});
  Branch hi = continue_branch(f, 0, 0.0, -1.0, 0.01, Vec{1.0});
  c.require(lo.terminated_by_fold && hi.terminated_by_fold, "branches must end at folds");
  FoldPoint a = locate_fold(f, lo), b = locate_fold(f, hi);
  c.near(std::fabs(a.mu), kFoldMu, 1e-6, "|mu*| lower");
  c.near(std::fabs(a.state[0]), kFoldX, 1e-6, "|x*| lower");
  c.near(std::fabs(b.mu), kFoldMu, 1e-6, "|mu*| upper");
  c.near(std::fabs(b.state[0]), kFoldX, 1e-6, "|x*| upper");
  return "folds at mu=" + fmt(a.mu) + " and " + fmt(b.mu);
}

std::string criterion3(Check& c) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  Equilibrium eq = analyze_equilibrium(f, Vec{-1.0});
  double rt = return_time(eq).time;
  c.near(rt, 0.5, 1e-9, "eigenvalue return time");

  // Empirical: time for a 1e-3 displacement to shrink to 1/e of itself.
  IntegratorConfig cfg;
  cfg.method = Method::Rk4Fixed;
  cfg.dt = 1e-4;
  const double d0 = 1e-3;
  Trajectory tr = integrate(f, Vec{-1.0 + d0}, cfg, 2.0);
  const double target = d0 / std::exp(1.0);
  double t_e = NAN;
  for (std::size_t i = 1; i < tr.size(); ++i) {
    double a = std::fabs(tr.states[i - 1][0] + 1.0), b = std::fabs(tr.states[i][0] + 1.0);
    if (a > target && b <= target) {
      t_e = tr.times[i - 1] + (a - target) / (a - b) * (tr.times[i] - tr.times[i - 1]);
      break;
    }
  }
  c.require(std::isfinite(t_e), "perturbation never decayed to 1/e");
  if (std::isfinite(t_e)) c.near(t_e, 0.5, 0.05, "empirical 1/e time");
  return "return time " + fmt(rt) + ", empirical " + fmt(t_e);
}

std::string criterion4(Check& c) {
  std::string detail;
  double prev = INFINITY;
  for (double mu : {-0.2, 0.0, 0.2, 0.3}) {
    BasinMap map = classify_grid(cubic(), ParamMap{{"mu", mu}}, Box{{-2.0, 2.0}}, 400, IntegratorConfig{});
    double xs = cubic_root(mu, -2.0, -kFoldX);
    double xu = cubic_root(mu, -kFoldX, kFoldX);
    double d = distance_to_threshold(Vec{xs}, separatrix_points(map)).distance;
    c.near(d, xu - xs, map.cell_width(0), "distance at mu=" + fmt(mu));
    c.require(d < prev, "not strictly decreasing at mu=" + fmt(mu));
    prev = d;
    detail += (detail.empty() ? "" : ", ") + fmt(d);
  }
  return "distances " + detail;
}

std::string criterion5(Check& c) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  SteepestPoint sp = steepest_recovery_point(f, Interval{-1.0, 0.0});
  c.near(sp.x_at_max, -0.57735, 1e-6, "x_at_max");
  c.near(sp.max_speed, 0.38490, 1e-6, "max_speed");
  c.require(sp.x_at_max > -1.0 && sp.x_at_max < 0.0, "steepest point must be interior");
  return "x=" + fmt(sp.x_at_max) + " speed=" + fmt(sp.max_speed);
}

std::string criterion6(Check& c) {
  VectorField f(cubic(), ParamMap{{"mu", 0.0}});
  std::vector<Vec> attr{{-1.0}, {1.0}};
  double fast = max_sustainable_kick(f, Vec{-1.0}, Vec{1.0}, 0.01, 10000, IntegratorConfig{}, attr, 0);
  double slow = max_sustainable_kick(f, Vec{-1.0}, Vec{1.0}, 50.0, 10, IntegratorConfig{}, attr, 0);
  c.near(fast / 0.01, kFoldMu, 0.05 * kFoldMu, "delta*(0.01)/0.01");
  c.near(slow, 1.0, 0.02, "delta*(50)");
  return "delta*(0.01)/0.01=" + fmt(fast / 0.01) + " delta*(50)=" + fmt(slow);
}

std::string criterion7(Check& c) {
  VectorField f(cubic(), ParamMap{});
  Branch br = continue_branch(f, 0, 0.0, 1.0, 0.01, Vec{-1.0});
  FoldPoint fp = locate_fold(f, br);
  std::vector<double> mus;
  for (int k = 0; k < 20; ++k) mus.push_back(fp.mu - 0.2 * std::pow(0.05, k / 19.0));
  CsdCurve curve = csd_curve(f, br, fp, mus);
  c.require(curve.rows.size() == mus.size(), "some samples were skipped");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (const auto& [mu, rate] : curve.rows) {
    double lx = std::log(fp.mu - mu), ly = std::log(rate);
    sx += lx, sy += ly, sxx += lx * lx, sxy += lx * ly;
  }
  double n = static_cast<double>(curve.rows.size());
  double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  c.near(slope, 0.5, 0.05, "log-log slope");
  return "slope " + fmt(slope);
}

std::string criterion8(Check& c) {
  VectorField f(cubic(), ParamMap{});
  ReversibilityVerdict h =
      classify_reversibility(f, 0, 0.0, Interval{-1.0, 1.0}, -0.5, IntegratorConfig{}, Vec{1.0});
  ReversibilityVerdict i =
      classify_reversibility(f, 0, 0.0, Interval{-1.0, 0.3}, -0.5, IntegratorConfig{}, Vec{1.0});
  const SystemModel lin = builtin_model("linear_1d");
  ReversibilityVerdict r = classify_reversibility(VectorField(lin, ParamMap{}), 0, 0.0,
                                                  Interval{-1.0, 1.0}, -0.5, IntegratorConfig{}, Vec{0.0});
  c.require(h.kind == Reversibility::Hysteretic, "accessible [-1,1] should be Hysteretic");
  c.require(h.restoring_param.has_value(), "Hysteretic needs a restoring value");
  if (h.restoring_param) c.near(*h.restoring_param, 0.3849, 1e-3, "restoring mu");
  c.require(i.kind == Reversibility::Irreversible, "accessible [-1,0.3] should be Irreversible");
  c.require(r.kind == Reversibility::Reversible, "linear_1d should be Reversible");
  return summary_line(h) + "; " + summary_line(i) + "; " + summary_line(r);
}

std::string criterion9(Check& c) {
  const SystemModel well = builtin_model("double_well_2d");
  BasinMap map = classify_grid(well, ParamMap{}, Box{{-2.0, 2.0}, {-2.0, 2.0}}, 100, IntegratorConfig{});
  std::size_t right = map.attractors.size();
  for (std::size_t a = 0; a < map.attractors.size(); ++a)
    if (distance(map.attractors[a].state, Vec{1.0, 0.0}) < 1e-6) right = a;
  c.require(right < map.attractors.size(), "no attractor at (1,0)");
  if (right == map.attractors.size()) return "";
  double area = basin_measure(map, right).volume;
  c.near(area, 8.0, 0.03 * 8.0, "right-basin area");
  SeparatrixEstimate sep = separatrix_points(map);
  double worst = 0.0;
  for (const auto& p : sep.points) worst = std::max(worst, std::fabs(p[0]));
  c.require(!sep.points.empty(), "no separatrix points");
  c.require(worst <= sep.cell_diameter, "separatrix point at |x|=" + fmt(worst));
  double d = distance_to_threshold(Vec{1.0, 0.0}, sep).distance;
  c.near(d, 1.0, sep.cell_diameter, "distance from (1,0)");
  return "area " + fmt(area) + ", max |x| on separatrix " + fmt(worst) + ", distance " + fmt(d);
}

std::string criterion10(Check& c) {
  // Symbolic vs finite-difference derivatives.
  auto samples = testing_support::fd_samples(12345, 1000);
  c.require(samples.size() == 1000, "only " + std::to_string(samples.size()) + " usable expressions");
  double worst = 0.0;
  for (const auto& s : samples) worst = std::max(worst, s.rel_err());
  c.require(worst < 1e-6, "derivative rel err " + fmt(worst));

  // RK4 convergence order.
  SystemModel decay("decay", {"x"}, {}, {"-x"});
  auto err = [&](double dt) {
    IntegratorConfig cfg;
    cfg.method = Method::Rk4Fixed;
    cfg.dt = dt;
    return std::fabs(integrate(decay, Vec{1.0}, ParamMap{}, cfg, 1.0).back()[0] - std::exp(-1.0));
  };
  double ratio = err(0.1) / err(0.05);
  c.require(ratio >= 8.0 && ratio <= 32.0, "RK4 ratio " + fmt(ratio));

  // Energy monotonicity on the double-well gradient flow.
  const SystemModel well = builtin_model("double_well_2d");
  auto energy = [](const Vec& s) { return (s[0] * s[0] - 1) * (s[0] * s[0] - 1) + s[1] * s[1]; };
  bool monotone = true;
  for (const Vec& x0 : {Vec{-0.2, 3.0}, Vec{1.9, -1.7}, Vec{0.05, 0.0}, Vec{-1.5, 0.5}}) {
    Trajectory tr = integrate(well, x0, ParamMap{}, IntegratorConfig{}, 10.0);
    for (std::size_t i = 1; i < tr.size(); ++i)
      if (energy(tr.states[i]) > energy(tr.states[i - 1]) + 1e-8) monotone = false;
  }
  c.require(monotone, "energy increased along a trajectory");

  // Byte-identical repeated runs.
  auto cli = [](std::vector<std::string> args) {
    std::ostringstream out, err;
    int code = run_cli(args, out, err);
    return std::to_string(code) + "\n" + out.str() + err.str();
  };
  const std::vector<std::vector<std::string>> runs{
      {"basin", "--builtin", "double_well_2d", "--box", "-2:2", "--res", "30", "--format", "json"},
      {"continue", "--builtin", "saddle_node_cubic", "--sweep", "mu=0:1", "--from", "x=-1"},
      {"classify", "--builtin", "saddle_node_cubic", "--mu0", "0", "--excursion", "-0.5", "--accessible", "-1:1"},
  };
  for (const auto& args : runs) c.require(cli(args) == cli(args), "non-identical output for " + args[0]);
  return "fd worst rel err " + fmt(worst) + ", rk4 ratio " + fmt(ratio);
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<std::string(Check&)>>> criteria{
      {"equilibria of the cubic at mu=0", criterion1},
      {"fold location on both branches", criterion2},
      {"return time at x=-1", criterion3},
      {"left-basin threshold distance shrinks with mu", criterion4},
      {"steepest recovery point", criterion5},
      {"repeated-kick limits", criterion6},
      {"critical slowing down exponent", criterion7},
      {"reversibility scenarios", criterion8},
      {"double-well basin map", criterion9},
      {"property suites", criterion10},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    std::string detail;
    try {
      detail = criteria[i].second(c);
    } catch (const std::exception& e) {
      c.notes.push_back(std::string("exception: ") + e.what());
    }
    bool ok = c.notes.empty();
    failed += ok ? 0 : 1;
    std::printf("%s %zu: %s", ok ? "PASS" : "FAIL", i + 1, criteria[i].first);
    if (!detail.empty()) std::printf(" (%s)", detail.c_str());
    std::printf("\n");
    for (const auto& n : c.notes) std::printf("    %s\n", n.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
