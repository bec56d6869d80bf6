#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace basinscope {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
  double width() const { return hi - lo; }
};

/// Axis-aligned box in state space, one interval per axis.
using Box = std::vector<Interval>;

inline void require_nondegenerate(const Box& box) {
  for (const auto& iv : box)
    if (!(iv.hi > iv.lo) || !std::isfinite(iv.lo) || !std::isfinite(iv.hi))
      throw Error(ErrorCategory::Usage, "box intervals must satisfy lo < hi");
}

inline bool contains(const Box& box, std::span<const double> x, double rel_slack = 1e-9) {
  for (std::size_t i = 0; i < box.size(); ++i) {
    double slack = rel_slack * box[i].width();
    if (x[i] < box[i].lo - slack || x[i] > box[i].hi + slack) return false;
  }
  return true;
}

}  // namespace basinscope
