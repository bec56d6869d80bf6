#pragma once

// Basin-of-attraction maps on a regular grid, and the geometric indicators
// derived from them: basin volume, separatrix estimates, and distances from
// equilibria or current states to the nearest threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <ostream>
#include <set>
#include <string>
#include <vector>

#include "box.hpp"
#include "equilibria.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "integrate.hpp"
#include "linalg.hpp"
#include "model.hpp"
#include "parallel.hpp"
#include "table.hpp"

namespace basinscope {

inline constexpr int kUnresolved = -1;
inline constexpr int kDiverged = -2;
inline constexpr std::size_t kDefaultSeedsPerAxis = 21;

inline std::string label_name(int label) {
  if (label == kUnresolved) return "unresolved";
  if (label == kDiverged) return "diverged";
  return std::to_string(label);
}

/// Labels on a resolution^n grid of cells; axis 0 varies fastest in the
/// flat cell order.
struct BasinMap {
  Box box;
  std::size_t resolution = 0;
  std::vector<int> labels;
  std::vector<Equilibrium> attractors;

  std::size_t dim() const { return box.size(); }
  std::size_t cell_count() const { return labels.size(); }

  double cell_width(std::size_t axis) const {
    return box[axis].width() / static_cast<double>(resolution);
  }

  double cell_volume() const {
    double v = 1.0;
    for (std::size_t a = 0; a < dim(); ++a) v *= cell_width(a);
    return v;
  }

  double cell_diameter() const {
    double s = 0.0;
    for (std::size_t a = 0; a < dim(); ++a) s += cell_width(a) * cell_width(a);
    return std::sqrt(s);
  }

  std::vector<std::size_t> multi_index(std::size_t flat) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t a = 0; a < dim(); ++a) {
      idx[a] = flat % resolution;
      flat /= resolution;
    }
    return idx;
  }

  std::size_t flat_index(const std::vector<std::size_t>& idx) const {
    std::size_t flat = 0;
    for (std::size_t a = dim(); a-- > 0;) flat = flat * resolution + idx[a];
    return flat;
  }

  Vec center(std::size_t flat) const {
    auto idx = multi_index(flat);
    Vec c(dim());
    for (std::size_t a = 0; a < dim(); ++a)
      c[a] = box[a].lo + (static_cast<double>(idx[a]) + 0.5) * cell_width(a);
    return c;
  }

  /// Cell containing `x` (clamped to the box).
  std::size_t cell_of(std::span<const double> x) const {
    std::vector<std::size_t> idx(dim());
    for (std::size_t a = 0; a < dim(); ++a) {
      double f = (x[a] - box[a].lo) / cell_width(a);
      long k = static_cast<long>(std::floor(f));
      k = std::clamp<long>(k, 0, static_cast<long>(resolution) - 1);
      idx[a] = static_cast<std::size_t>(k);
    }
    return flat_index(idx);
  }

  std::set<int> attractor_labels_present() const {
    std::set<int> s;
    for (int l : labels)
      if (l >= 0) s.insert(l);
    return s;
  }
};

namespace detail {

inline void require_grid_shape(std::size_t dim, std::size_t resolution) {
  if (dim > kMaxGridDimension)
    throw Error(ErrorCategory::Usage, "grid operations support at most 3 dimensions");
  if (resolution < 8) throw Error(ErrorCategory::Usage, "grid resolution must be >= 8");
}

inline int label_from(const SettleResult& r) {
  switch (r.verdict) {
    case Verdict::Settled: return static_cast<int>(r.attractor);
    case Verdict::Diverged: return kDiverged;
    case Verdict::Undecided: return kUnresolved;
  }
  return kUnresolved;
}

}  // namespace detail

/// Settles every cell centre against a fixed attractor list. Cells are
/// independent; the result does not depend on the worker count.
inline std::vector<int> label_cells(const VectorField& field, const BasinMap& shape,
                                    const IntegratorConfig& cfg,
                                    const std::vector<Vec>& attractors) {
  std::vector<int> labels(shape.cell_count(), kUnresolved);
  parallel_for(labels.size(), [&](std::size_t i) {
    labels[i] = detail::label_from(settle(field, shape.center(i), cfg, attractors));
  });
  return labels;
}

inline BasinMap classify_grid(const VectorField& field, const Box& box, std::size_t resolution,
                              const IntegratorConfig& cfg,
                              std::size_t seeds_per_axis = kDefaultSeedsPerAxis) {
  detail::require_grid_shape(field.dim(), resolution);
  BasinMap map;
  map.box = box;
  map.resolution = resolution;
  std::size_t cells = 1;
  for (std::size_t a = 0; a < box.size(); ++a) cells *= resolution;
  map.labels.assign(cells, kUnresolved);
  map.attractors = stable_only(find_equilibria(field, box, seeds_per_axis));
  if (map.attractors.empty()) throw NoAttractors();
  map.labels = label_cells(field, map, cfg, states_of(map.attractors));
  return map;
}

inline BasinMap classify_grid(const SystemModel& m, const ParamMap& overrides, const Box& box,
                              std::size_t resolution, const IntegratorConfig& cfg,
                              std::size_t seeds_per_axis = kDefaultSeedsPerAxis) {
  return classify_grid(VectorField(m, overrides), box, resolution, cfg, seeds_per_axis);
}

struct BasinMeasure {
  double volume = 0.0;
  bool touches_boundary = false;  // the basin may extend beyond the box
};

inline BasinMeasure basin_measure(const BasinMap& map, std::size_t attractor) {
  if (attractor >= map.attractors.size())
    throw Error(ErrorCategory::Usage, "attractor index out of range");
  BasinMeasure out;
  std::size_t count = 0;
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    if (map.labels[i] != static_cast<int>(attractor)) continue;
    ++count;
    if (!out.touches_boundary) {
      for (std::size_t k : map.multi_index(i))
        if (k == 0 || k + 1 == map.resolution) out.touches_boundary = true;
    }
  }
  out.volume = static_cast<double>(count) * map.cell_volume();
  return out;
}

struct SeparatrixEstimate {
  std::vector<Vec> points;  // midpoints of faces between differing attractor labels
  double cell_diameter = 0.0;
};

namespace detail {

/// Calls visit(a, b, axis) for every pair of face-adjacent cells.
template <typename Visit>
void for_each_face(const BasinMap& map, Visit&& visit) {
  std::size_t stride = 1;
  for (std::size_t axis = 0; axis < map.dim(); ++axis) {
    for (std::size_t i = 0; i < map.cell_count(); ++i) {
      if ((i / stride) % map.resolution + 1 == map.resolution) continue;
      visit(i, i + stride, axis);
    }
    stride *= map.resolution;
  }
}

inline Vec face_midpoint(const BasinMap& map, std::size_t a, std::size_t b) {
  Vec ca = map.center(a), cb = map.center(b);
  for (std::size_t k = 0; k < ca.size(); ++k) ca[k] = 0.5 * (ca[k] + cb[k]);
  return ca;
}

}  // namespace detail

inline SeparatrixEstimate separatrix_points(const BasinMap& map) {
  if (map.attractor_labels_present().size() < 2) throw SingleBasin();
  SeparatrixEstimate sep;
  sep.cell_diameter = map.cell_diameter();
  detail::for_each_face(map, [&](std::size_t a, std::size_t b, std::size_t) {
    int la = map.labels[a], lb = map.labels[b];
    if (la >= 0 && lb >= 0 && la != lb) sep.points.push_back(detail::face_midpoint(map, a, b));
  });
  return sep;
}

struct ThresholdDistance {
  double distance = 0.0;
  double uncertainty = 0.0;
};

/// Euclidean distance from `point` to the nearest separatrix sample. Applied
/// to a stable equilibrium this is the equilibrium-to-threshold distance;
/// applied to the current state it is the precariousness.
inline ThresholdDistance distance_to_threshold(const Vec& point, const SeparatrixEstimate& sep) {
  if (sep.points.empty()) throw SingleBasin();
  double best = std::numeric_limits<double>::infinity();
  for (const auto& s : sep.points) best = std::min(best, distance(point, s));
  return {best, sep.cell_diameter};
}

struct DirectionalDistance {
  enum class Status { Found, NoEscape, Undecided };
  Status status = Status::NoEscape;
  double distance = 0.0;  // valid unless NoEscape
};

inline const char* status_name(DirectionalDistance::Status s) {
  switch (s) {
    case DirectionalDistance::Status::Found: return "found";
    case DirectionalDistance::Status::NoEscape: return "no_escape";
    case DirectionalDistance::Status::Undecided: return "undecided";
  }
  return "?";
}

inline constexpr std::size_t kDirectionalScanSamples = 64;

inline void require_unit(const Vec& direction) {
  if (std::fabs(norm2(direction) - 1.0) > 1e-12)
    throw Error(ErrorCategory::Usage, "direction must be a unit vector");
}

/// Smallest displacement along `direction` that moves `point` into another
/// basin (or to divergence): a coarse scan followed by bisection. Samples
/// whose settle is undecided count as having left the home basin; the result
/// is reported Undecided if no sample ever settled definitively elsewhere.
inline DirectionalDistance directional_distance(const VectorField& field, const Vec& point,
                                                const Vec& direction,
                                                const IntegratorConfig& cfg, double max_range) {
  require_unit(direction);
  if (!(max_range > 0.0)) throw Error(ErrorCategory::Usage, "max_range must be positive");
  RelaxResult home = relax(field, point, cfg);
  if (home.verdict != Verdict::Settled)
    throw Error(ErrorCategory::Inconclusive, "start point does not settle to an attractor");

  enum class Outcome { Home, Escaped, Undecided };
  auto probe = [&](double r) {
    Vec x = point;
    for (std::size_t i = 0; i < x.size(); ++i) x[i] += r * direction[i];
    RelaxResult res = relax(field, x, cfg);
    if (res.verdict == Verdict::Undecided) return Outcome::Undecided;
    if (res.verdict == Verdict::Settled && distance(res.state, home.state) < kDedupeDistance)
      return Outcome::Home;
    return Outcome::Escaped;
  };

  DirectionalDistance out;
  bool definite = false;
  double lo = 0.0, hi = -1.0;
  for (std::size_t k = 1; k <= kDirectionalScanSamples; ++k) {
    double r = max_range * static_cast<double>(k) / kDirectionalScanSamples;
    Outcome o = probe(r);
    if (o == Outcome::Home) {
      lo = r;
      continue;
    }
    hi = r;
    definite = o == Outcome::Escaped;
    break;
  }
  if (hi < 0.0) return out;  // NoEscape

  const double tol = 1e-6 * max_range;
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    Outcome o = probe(mid);
    if (o == Outcome::Home) {
      lo = mid;
    } else {
      hi = mid;
      definite = definite || o == Outcome::Escaped;
    }
  }
  out.distance = 0.5 * (lo + hi);
  out.status = definite ? DirectionalDistance::Status::Found
                        : DirectionalDistance::Status::Undecided;
  return out;
}

inline DirectionalDistance directional_distance(const SystemModel& m, const ParamMap& overrides,
                                                const Vec& point, const Vec& direction,
                                                const IntegratorConfig& cfg, double max_range) {
  return directional_distance(VectorField(m, overrides), point, direction, cfg, max_range);
}

/// "i_<axis>...,<axis>...,label", one row per cell. Labels are attractor
/// indices or the words "unresolved" / "diverged".
inline Table basin_table(const std::vector<std::string>& axis_names, const BasinMap& map) {
  Table t;
  for (const auto& a : axis_names) t.header.push_back("i_" + a);
  for (const auto& a : axis_names) t.header.push_back(a);
  t.header.push_back("label");
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    std::vector<Cell> row;
    for (std::size_t k : map.multi_index(i)) row.emplace_back(std::to_string(k));
    for (double c : map.center(i)) row.emplace_back(c);
    row.emplace_back(label_name(map.labels[i]));
    t.add_row(std::move(row));
  }
  return t;
}

/// One "<axis>..." row per separatrix point.
inline Table separatrix_table(const std::vector<std::string>& axis_names,
                              const SeparatrixEstimate& sep) {
  Table t;
  t.header = axis_names;
  for (const auto& p : sep.points) t.add_row(std::vector<Cell>(p.begin(), p.end()));
  return t;
}

}  // namespace basinscope
