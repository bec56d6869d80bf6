#pragma once

// Command-line front end. run_cli parses an argument list, runs one analysis
// and writes a CSV or JSON table to --out (or `out`). A one-line summary goes
// to `err`. Exit codes: 0 ok, 1 usage/schema, 2 numerical, 3 inconclusive.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "basin.hpp"
#include "bifurcation.hpp"
#include "box.hpp"
#include "equilibria.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "integrate.hpp"
#include "kicks.hpp"
#include "model.hpp"
#include "table.hpp"

namespace basinscope {

inline constexpr const char* kToolVersion = "1.0.0";

namespace cli_detail {

[[noreturn]] inline void usage(const std::string& msg) { throw Error(ErrorCategory::Usage, msg); }

inline double parse_number(const std::string& s, const std::string& what) {
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v))
    usage("invalid number '" + s + "' for " + what);
  return v;
}

inline std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

inline Vec parse_vec(const std::string& s, const std::string& what) {
  Vec v;
  for (const auto& part : split(s, ',')) v.push_back(parse_number(part, what));
  if (v.empty()) usage("empty vector for " + what);
  return v;
}

inline Interval parse_range(const std::string& s, const std::string& what) {
  auto parts = split(s, ':');
  if (parts.size() != 2) usage("range for " + what + " must be lo:hi, got '" + s + "'");
  Interval r{parse_number(parts[0], what), parse_number(parts[1], what)};
  if (!(r.hi > r.lo)) usage("range for " + what + " must satisfy lo < hi");
  return r;
}

inline Box parse_box(const std::string& s, std::size_t dim) {
  Box box;
  for (const auto& part : split(s, ',')) box.push_back(parse_range(part, "--box"));
  if (box.size() == 1 && dim > 1) box.assign(dim, box.front());
  if (box.size() != dim)
    usage("--box needs " + std::to_string(dim) + " ranges, got " + std::to_string(box.size()));
  return box;
}

/// "name=lo:hi"
inline std::pair<std::string, Interval> parse_sweep(const std::string& s) {
  auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) usage("--sweep must be name=lo:hi");
  std::string name = s.substr(0, eq);
  auto parts = split(s.substr(eq + 1), ':');
  if (parts.size() != 2) usage("--sweep must be name=lo:hi");
  // lo may exceed hi here: continuation runs in either direction.
  return {name, {parse_number(parts[0], "--sweep"), parse_number(parts[1], "--sweep")}};
}

/// Either a plain comma vector or "name=value,..." covering every state name.
inline Vec parse_state(const std::string& s, const SystemModel& m, const std::string& what) {
  if (s.find('=') == std::string::npos) {
    Vec v = parse_vec(s, what);
    if (v.size() != m.dim()) usage(what + " needs " + std::to_string(m.dim()) + " components");
    return v;
  }
  std::map<std::string, double> given;
  for (const auto& part : split(s, ',')) {
    auto eq = part.find('=');
    if (eq == std::string::npos) usage(what + ": expected name=value, got '" + part + "'");
    std::string name = part.substr(0, eq);
    if (given.count(name)) usage(what + ": duplicate state '" + name + "'");
    given[name] = parse_number(part.substr(eq + 1), what);
  }
  Vec v(m.dim());
  for (std::size_t i = 0; i < m.dim(); ++i) {
    auto it = given.find(m.state()[i]);
    if (it == given.end()) usage(what + ": missing state '" + m.state()[i] + "'");
    v[i] = it->second;
    given.erase(it);
  }
  if (!given.empty()) throw UnknownIdentifier(given.begin()->first, what);
  return v;
}

/// Direction vectors are normalized; the zero vector is rejected.
inline Vec parse_direction(const std::string& s, std::size_t dim) {
  Vec d = parse_vec(s, "--dir");
  if (d.size() != dim) usage("--dir needs " + std::to_string(dim) + " components");
  double n = norm2(d);
  if (!(n > 0.0)) usage("--dir must be nonzero");
  for (double& c : d) c /= n;
  return d;
}

inline std::size_t nearest(const std::vector<Vec>& pts, const Vec& x) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < pts.size(); ++i)
    if (distance(pts[i], x) < distance(pts[best], x)) best = i;
  return best;
}

struct Common {
  std::string builtin;
  std::string model_file;
  std::vector<std::string> params;
  std::string out_path;
  std::string format = "csv";
  unsigned long long seed = 0;
  std::string method = "rk45";
  IntegratorConfig cfg;
};

inline void add_common(CLI::App* sub, Common& c) {
  auto* b = sub->add_option("--builtin", c.builtin, "Builtin model name")
                ->check(CLI::IsMember(builtin_model_names()));
  auto* m = sub->add_option("--model", c.model_file, "Model definition JSON file");
  b->excludes(m);
  m->excludes(b);
  sub->add_option("--param", c.params, "Parameter override name=value (repeatable)");
  sub->add_option("--out", c.out_path, "Output file (default: standard output)");
  sub->add_option("--format", c.format, "Output format")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
  sub->add_option("--seed", c.seed, "Seed recorded in output metadata; all methods are deterministic")
      ->capture_default_str();
  sub->add_option("--method", c.method, "Integrator")
      ->check(CLI::IsMember({"rk4", "rk45"}))
      ->capture_default_str();
  sub->add_option("--dt", c.cfg.dt, "Fixed (rk4) or initial (rk45) step")->capture_default_str();
  sub->add_option("--rtol", c.cfg.rtol, "Relative tolerance (rk45)")->capture_default_str();
  sub->add_option("--atol", c.cfg.atol, "Absolute tolerance (rk45)")->capture_default_str();
  sub->add_option("--tmax", c.cfg.t_max, "Integration horizon")->capture_default_str();
  sub->add_option("--capture", c.cfg.capture_radius, "Attractor capture radius")
      ->capture_default_str();
}

/// Resolved model, overrides and integrator for one invocation.
struct Context {
  std::unique_ptr<SystemModel> model;
  ParamMap overrides;
  IntegratorConfig cfg;
  nlohmann::ordered_json meta;

  const SystemModel& m() const { return *model; }
  VectorField field() const { return VectorField(*model, overrides); }
};

inline Context resolve(const Common& c, const std::string& command) {
  Context ctx;
  if (c.builtin.empty() == c.model_file.empty()) usage("exactly one of --builtin or --model is required");
  if (!c.builtin.empty()) {
    ctx.model = std::make_unique<SystemModel>(builtin_model(c.builtin));
  } else {
    std::ifstream in(c.model_file);
    if (!in) usage("cannot read model file '" + c.model_file + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    ctx.model = std::make_unique<SystemModel>(load_model(ss.str()));
  }
  for (const auto& p : c.params) {
    auto eq = p.find('=');
    if (eq == std::string::npos || eq == 0) usage("--param must be name=value, got '" + p + "'");
    std::string name = p.substr(0, eq);
    ctx.model->require_param(name);
    if (ctx.overrides.count(name)) usage("--param given twice for '" + name + "'");
    ctx.overrides[name] = parse_number(p.substr(eq + 1), "--param " + name);
  }
  ctx.cfg = c.cfg;
  ctx.cfg.method = c.method == "rk4" ? Method::Rk4Fixed : Method::Rk45Adaptive;
  ctx.cfg.validate();

  ctx.meta["tool"] = "basinscope";
  ctx.meta["version"] = kToolVersion;
  ctx.meta["command"] = command;
  ctx.meta["model"] = ctx.model->name();
  nlohmann::ordered_json ov = nlohmann::ordered_json::object();
  for (const auto& [k, v] : ctx.overrides) ov[k] = v;
  ctx.meta["overrides"] = ov;
  ctx.meta["seed"] = c.seed;
  return ctx;
}

inline void emit(const Table& t, const Common& c, const Context& ctx, std::ostream& out,
                 const std::string& path_override = {}) {
  const std::string& path = path_override.empty() ? c.out_path : path_override;
  auto write = [&](std::ostream& os) {
    if (c.format == "json")
      write_json(os, t, ctx.meta);
    else
      write_csv(os, t);
  };
  if (path.empty()) {
    write(out);
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) usage("cannot open output file '" + path + "'");
  write(f);
  if (!f) usage("failed writing output file '" + path + "'");
}

inline std::string param_for(const SystemModel& m, const std::string& requested) {
  if (!requested.empty()) {
    m.require_param(requested);
    return requested;
  }
  if (m.param_names().empty()) usage("model has no parameters");
  return m.param_names().front();
}

/// Stable equilibria in `box`; throws NoAttractors when there are none.
inline std::vector<Equilibrium> attractors_in(const VectorField& f, const Box& box,
                                              std::size_t seeds) {
  auto st = stable_only(find_equilibria(f, box, seeds));
  if (st.empty()) throw NoAttractors();
  return st;
}

inline std::size_t home_of(const VectorField& f, const Vec& x0, const IntegratorConfig& cfg,
                           const std::vector<Vec>& attractors) {
  SettleResult r = settle(f, x0, cfg, attractors);
  if (r.verdict == Verdict::Undecided)
    throw Error(ErrorCategory::Inconclusive, "start state did not settle within t_max");
  if (r.verdict != Verdict::Settled) usage("start state does not settle to an attractor");
  return r.attractor;
}

}  // namespace cli_detail

/// Runs one CLI invocation; `args` excludes the program name.
inline int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  using namespace cli_detail;

  CLI::App app{"Resilience indicators for ODE models", "basinscope"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  Common c;
  std::string box_s, point_s, from_s, sweep_s, range_s, mode = "threshold", sep_out;
  std::string vary, accessible_s, weights_s = "1,1", mu_list_s, delta_s, force_s, tau_s;
  std::vector<std::string> dirs;
  std::size_t seeds = kDefaultSeedsPerAxis, res = 50, samples = 201, count = 1;
  double max_range = 10.0, period = 1.0, step = 0.01, mu0 = 0.0, excursion = 0.0;
  std::string steepest_s;

  auto* eq = app.add_subcommand("equilibria", "Find and classify equilibria in a box");
  add_common(eq, c);
  eq->add_option("--box", box_s, "Search box lo:hi[,lo:hi...] (one range repeats per axis)")
      ->required();
  eq->add_option("--seeds", seeds, "Newton seeds per axis")->capture_default_str();

  auto* basin = app.add_subcommand("basin", "Classify a grid of initial states by attractor");
  add_common(basin, c);
  basin->add_option("--box", box_s, "Grid box lo:hi[,lo:hi...]")->required();
  basin->add_option("--res", res, "Cells per axis")->capture_default_str();
  basin->add_option("--seeds", seeds, "Newton seeds per axis")->capture_default_str();
  basin->add_option("--separatrix-out", sep_out, "Also write separatrix points here");

  auto* dist = app.add_subcommand("distance", "Threshold, precariousness or directional distance");
  add_common(dist, c);
  dist->add_option("--mode", mode, "What to measure")
      ->check(CLI::IsMember({"threshold", "precariousness", "directional"}))
      ->capture_default_str();
  dist->add_option("--box", box_s, "Grid box (threshold, precariousness)");
  dist->add_option("--res", res, "Cells per axis")->capture_default_str();
  dist->add_option("--seeds", seeds, "Newton seeds per axis")->capture_default_str();
  dist->add_option("--point", point_s, "State for precariousness / directional");
  dist->add_option("--dir", dirs, "Direction vector, comma-separated (repeatable)");
  dist->add_option("--range", max_range, "Maximum directional search distance")
      ->capture_default_str();

  auto* kick = app.add_subcommand("kick", "Repeated kicks: simulate one schedule or sweep delta*");
  add_common(kick, c);
  kick->add_option("--box", box_s, "Attractor search box")->required();
  kick->add_option("--seeds", seeds, "Newton seeds per axis")->capture_default_str();
  kick->add_option("--from", from_s, "Start state")->required();
  kick->add_option("--dir", dirs, "Kick direction")->required()->expected(1);
  kick->add_option("--delta", delta_s, "Kick magnitude: simulate this schedule");
  kick->add_option("--tau", tau_s, "Comma-separated periods: sweep the largest sustainable kick");
  kick->add_option("--period", period, "Flow time between kicks (simulate)")->capture_default_str();
  kick->add_option("--count", count, "Number of kicks")->capture_default_str();

  auto* land = app.add_subcommand("landscape", "Sampled 1-D potential U with U' = -f");
  add_common(land, c);
  land->add_option("--range", range_s, "Interval lo:hi")->required();
  land->add_option("--samples", samples, "Sample count")->capture_default_str();
  land->add_option("--steepest", steepest_s, "Also report the fastest flow in lo:hi");

  auto* resist = app.add_subcommand("resistance", "Forcing-to-displacement ratio");
  add_common(resist, c);
  resist->add_option("--from", from_s, "Stable equilibrium")->required();
  resist->add_option("--dir", dirs, "Forcing direction")->required()->expected(1);
  resist->add_option("--force", force_s, "Comma-separated forcing magnitudes")->required();

  auto* cont = app.add_subcommand("continue", "Follow an equilibrium branch and locate folds");
  add_common(cont, c);
  cont->add_option("--sweep", sweep_s, "Parameter range name=start:end")->required();
  cont->add_option("--from", from_s, "Equilibrium at the start value")->required();
  cont->add_option("--step", step, "Initial continuation step")->capture_default_str();

  auto* csd = app.add_subcommand("csd", "Recovery rate along a branch approaching a fold");
  add_common(csd, c);
  csd->add_option("--sweep", sweep_s, "Parameter range name=start:end")->required();
  csd->add_option("--from", from_s, "Equilibrium at the start value")->required();
  csd->add_option("--step", step, "Initial continuation step")->capture_default_str();
  csd->add_option("--mu", mu_list_s,
                  "Comma-separated samples (default: 20 log-spaced, 0.01..0.2 before the fold)");

  auto* exp = app.add_subcommand("expanded", "Basin map over (state, parameter)");
  add_common(exp, c);
  exp->add_option("--box", box_s, "State range lo:hi")->required();
  exp->add_option("--sweep", sweep_s, "Parameter range name=lo:hi")->required();
  exp->add_option("--res", res, "Cells per axis")->capture_default_str();
  exp->add_option("--seeds", seeds, "Newton seeds per state axis")->capture_default_str();
  exp->add_option("--point", point_s, "Point x,mu for expanded precariousness");
  exp->add_option("--weights", weights_s, "Weights w_x,w_mu")->capture_default_str();

  auto* cls = app.add_subcommand("classify", "Reversibility of a parameter excursion");
  add_common(cls, c);
  cls->add_option("--vary", vary, "Parameter to vary (default: first declared)");
  cls->add_option("--mu0", mu0, "Baseline parameter value")->required();
  cls->add_option("--excursion", excursion, "Excursion parameter value")->required();
  cls->add_option("--accessible", accessible_s, "Accessible parameter range lo:hi")->required();
  cls->add_option("--from", from_s, "Home state (default: highest stable equilibrium in --box)");
  cls->add_option("--box", box_s, "Equilibrium search box when --from is absent")
      ->default_str("-10:10");
  cls->add_option("--seeds", seeds, "Newton seeds per axis")->capture_default_str();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  try {
    if (eq->parsed()) {
      Context ctx = resolve(c, "equilibria");
      auto eqs = find_equilibria(ctx.field(), parse_box(box_s, ctx.m().dim()), seeds);
      emit(equilibria_table(ctx.m(), eqs), c, ctx, out);
      std::size_t stable = stable_only(eqs).size();
      err << eqs.size() << " equilibria, " << stable << " stable\n";
      return 0;
    }

    if (basin->parsed()) {
      Context ctx = resolve(c, "basin");
      BasinMap map = classify_grid(ctx.field(), parse_box(box_s, ctx.m().dim()), res, ctx.cfg, seeds);
      emit(basin_table(ctx.m().state(), map), c, ctx, out);
      for (std::size_t a = 0; a < map.attractors.size(); ++a) {
        BasinMeasure bm = basin_measure(map, a);
        err << "attractor " << a << " volume=" << format_sig9(bm.volume)
            << (bm.touches_boundary ? " (touches box boundary)" : "") << '\n';
      }
      if (!sep_out.empty()) emit(separatrix_table(ctx.m().state(), separatrix_points(map)), c, ctx, out, sep_out);
      return 0;
    }

    if (dist->parsed()) {
      Context ctx = resolve(c, "distance");
      VectorField f = ctx.field();
      const std::size_t n = ctx.m().dim();
      if (mode == "directional") {
        if (point_s.empty() || dirs.empty()) usage("directional mode needs --point and --dir");
        Vec p = parse_state(point_s, ctx.m(), "--point");
        Table t;
        for (const auto& s : ctx.m().state()) t.header.push_back("dir_" + s);
        t.header.push_back("status");
        t.header.push_back("distance");
        std::optional<double> best;
        bool undecided = false;
        for (const auto& d_s : dirs) {
          Vec d = parse_direction(d_s, n);
          DirectionalDistance dd = directional_distance(f, p, d, ctx.cfg, max_range);
          std::vector<Cell> row(d.begin(), d.end());
          row.emplace_back(std::string(status_name(dd.status)));
          if (dd.status == DirectionalDistance::Status::Found) {
            row.emplace_back(dd.distance);
            best = std::min(best.value_or(dd.distance), dd.distance);
          } else {
            row.emplace_back(std::monostate{});
            undecided |= dd.status == DirectionalDistance::Status::Undecided;
          }
          t.add_row(std::move(row));
        }
        emit(t, c, ctx, out);
        if (best) {
          err << "min directional distance=" << format_sig9(*best) << '\n';
          return 0;
        }
        err << "no escape found in any direction\n";
        return undecided ? 3 : 0;
      }
      if (box_s.empty()) usage(mode + " mode needs --box");
      BasinMap map = classify_grid(f, parse_box(box_s, n), res, ctx.cfg, seeds);
      SeparatrixEstimate sep = separatrix_points(map);
      Table t;
      if (mode == "threshold") {
        t.header = {"attractor"};
        for (const auto& s : ctx.m().state()) t.header.push_back(s);
        t.header.push_back("distance");
        t.header.push_back("uncertainty");
        for (std::size_t a = 0; a < map.attractors.size(); ++a) {
          const Vec& x = map.attractors[a].state;
          ThresholdDistance td = distance_to_threshold(x, sep);
          std::vector<Cell> row{std::to_string(a)};
          for (double v : x) row.emplace_back(v);
          row.emplace_back(td.distance);
          row.emplace_back(td.uncertainty);
          t.add_row(std::move(row));
          err << "attractor " << a << " distance=" << format_sig9(td.distance) << " +/- "
              << format_sig9(td.uncertainty) << '\n';
        }
      } else {
        if (point_s.empty()) usage("precariousness mode needs --point");
        Vec p = parse_state(point_s, ctx.m(), "--point");
        ThresholdDistance td = distance_to_threshold(p, sep);
        t.header = ctx.m().state();
        t.header.push_back("distance");
        t.header.push_back("uncertainty");
        std::vector<Cell> row(p.begin(), p.end());
        row.emplace_back(td.distance);
        row.emplace_back(td.uncertainty);
        t.add_row(std::move(row));
        err << "precariousness=" << format_sig9(td.distance) << " +/- "
            << format_sig9(td.uncertainty) << '\n';
      }
      emit(t, c, ctx, out);
      return 0;
    }

    if (kick->parsed()) {
      Context ctx = resolve(c, "kick");
      VectorField f = ctx.field();
      const std::size_t n = ctx.m().dim();
      auto attr = attractors_in(f, parse_box(box_s, n), seeds);
      std::vector<Vec> states = states_of(attr);
      Vec x0 = parse_state(from_s, ctx.m(), "--from");
      Vec d = parse_direction(dirs.front(), n);
      std::size_t home = home_of(f, x0, ctx.cfg, states);
      if (delta_s.empty() == tau_s.empty()) usage("kick needs exactly one of --delta or --tau");
      if (!delta_s.empty()) {
        KickSchedule sched{d, parse_number(delta_s, "--delta"), period, count};
        KickOutcome o = simulate_kicks(f, x0, sched, ctx.cfg, states, home);
        Table t;
        t.header = {"kicks_applied", "escaped", "verdict"};
        for (const auto& s : ctx.m().state()) t.header.push_back(s);
        std::string esc = o.escaped ? (*o.escaped ? "true" : "false") : "unknown";
        const char* verdict = o.final_verdict == Verdict::Settled    ? "settled"
                              : o.final_verdict == Verdict::Diverged ? "diverged"
                                                                     : "undecided";
        std::vector<Cell> row{std::to_string(o.kicks_applied), esc, std::string(verdict)};
        for (double v : o.final_state) row.emplace_back(v);
        t.add_row(std::move(row));
        emit(t, c, ctx, out);
        err << "escaped=" << esc << '\n';
        return o.escaped ? 0 : 3;
      }
      std::vector<std::pair<double, double>> sweep;
      for (double tau : parse_vec(tau_s, "--tau"))
        sweep.emplace_back(tau, max_sustainable_kick(f, x0, d, tau, count, ctx.cfg, states, home));
      emit(kick_sweep_table(sweep), c, ctx, out);
      err << sweep.size() << " periods swept\n";
      return 0;
    }

    if (land->parsed()) {
      Context ctx = resolve(c, "landscape");
      VectorField f = ctx.field();
      emit(landscape_table(potential_1d(f, parse_range(range_s, "--range"), samples)), c, ctx, out);
      if (!steepest_s.empty()) {
        SteepestPoint sp = steepest_recovery_point(f, parse_range(steepest_s, "--steepest"));
        err << "steepest x=" << format_sig9(sp.x_at_max) << " speed=" << format_sig9(sp.max_speed)
            << '\n';
      } else {
        err << samples << " samples\n";
      }
      return 0;
    }

    if (resist->parsed()) {
      Context ctx = resolve(c, "resistance");
      VectorField f = ctx.field();
      Vec x0 = parse_state(from_s, ctx.m(), "--from");
      Vec d = parse_direction(dirs.front(), ctx.m().dim());
      Table t;
      t.header = {"force", "resistance"};
      for (double F : parse_vec(force_s, "--force")) {
        double r = resistance_ratio(f, x0, d, F, ctx.cfg);
        t.add_row({F, r});
        err << "force=" << format_sig9(F) << " resistance=" << format_sig9(r) << '\n';
      }
      emit(t, c, ctx, out);
      return 0;
    }

    if (cont->parsed() || csd->parsed()) {
      const bool is_csd = csd->parsed();
      Context ctx = resolve(c, is_csd ? "csd" : "continue");
      VectorField f = ctx.field();
      auto [pname, span] = parse_sweep(sweep_s);
      std::size_t pidx = ctx.m().require_param(pname);
      Vec x0 = parse_state(from_s, ctx.m(), "--from");
      Branch br = continue_branch(f, pidx, span.lo, span.hi, step, x0);
      if (!is_csd) {
        emit(branch_table(ctx.m(), br), c, ctx, out);
        if (br.terminated_by_fold) {
          FoldPoint fp = locate_fold(f, br);
          char buf[64];
          std::snprintf(buf, sizeof buf, "%.6f", fp.mu);
          err << "fold " << pname << '=' << buf << '\n';
        } else {
          err << "no fold in " << pname << '=' << format_sig9(span.lo) << ':'
              << format_sig9(span.hi) << '\n';
        }
        return 0;
      }
      if (!br.terminated_by_fold) throw NoFolds();
      FoldPoint fp = locate_fold(f, br);
      std::vector<double> mus;
      if (!mu_list_s.empty()) {
        mus = parse_vec(mu_list_s, "--mu");
      } else {
        const double sgn = br.direction;
        for (int k = 0; k < 20; ++k) {
          double off = 0.2 * std::pow(0.01 / 0.2, static_cast<double>(k) / 19.0);
          mus.push_back(fp.mu - sgn * off);
        }
      }
      CsdCurve curve = csd_curve(f, br, fp, mus);
      emit(csd_table(pname, curve), c, ctx, out);
      for (const auto& w : curve.warnings) err << "warning: " << w << '\n';
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.6f", fp.mu);
      err << "fold " << pname << '=' << buf << ", " << curve.rows.size() << " samples\n";
      return 0;
    }

    if (exp->parsed()) {
      Context ctx = resolve(c, "expanded");
      VectorField f = ctx.field();
      auto [pname, span] = parse_sweep(sweep_s);
      if (!(span.hi > span.lo)) usage("--sweep range must satisfy lo < hi");
      std::size_t pidx = ctx.m().require_param(pname);
      if (ctx.m().dim() != 1) usage("expanded needs a 1-D model");
      Box box{parse_range(box_s, "--box"), span};
      BasinMap map = expanded_basin(f, pidx, box, res, ctx.cfg, seeds);
      std::vector<std::string> axes{ctx.m().state().front(), pname};
      emit(basin_table(axes, map), c, ctx, out);
      if (!point_s.empty()) {
        Vec p = parse_vec(point_s, "--point");
        Vec w = parse_vec(weights_s, "--weights");
        if (p.size() != 2 || w.size() != 2) usage("--point and --weights need two components");
        double d = expanded_precariousness(p, map, w[0], w[1]);
        err << "expanded precariousness=" << format_sig9(d) << " (w_x=" << format_sig9(w[0])
            << ", w_" << pname << '=' << format_sig9(w[1]) << ")\n";
      } else {
        err << map.attractors.size() << " attractors\n";
      }
      return 0;
    }

    if (cls->parsed()) {
      Context ctx = resolve(c, "classify");
      const std::string pname = param_for(ctx.m(), vary);
      std::size_t pidx = ctx.m().require_param(pname);
      VectorField f = ctx.field();
      VectorField at0 = f.with_param(pidx, mu0);
      Vec start;
      if (!from_s.empty()) {
        start = parse_state(from_s, ctx.m(), "--from");
      } else {
        std::string b = box_s.empty() ? "-10:10" : box_s;
        auto attr = attractors_in(at0, parse_box(b, ctx.m().dim()), seeds);
        start = attr.back().state;  // lexicographically largest
      }
      ReversibilityVerdict v = classify_reversibility(
          f, pidx, mu0, parse_range(accessible_s, "--accessible"), excursion, ctx.cfg, start);
      emit(verdict_trace_table(ctx.m(), v, pname), c, ctx, out);
      err << summary_line(v) << '\n';
      return 0;
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.category()) {
      case ErrorCategory::Usage: return 1;
      case ErrorCategory::Numerical: return 2;
      case ErrorCategory::Inconclusive: return 3;
    }
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace basinscope
