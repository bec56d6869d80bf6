#include <gtest/gtest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

#include "basinscope/basin.hpp"

using namespace basinscope;

namespace {

const SystemModel& cubic() {
  static const SystemModel m = builtin_model("saddle_node_cubic");
  return m;
}
const SystemModel& well() {
  static const SystemModel m = builtin_model("double_well_2d");
  return m;
}

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

std::size_t index_of_attractor_near(const BasinMap& map, const Vec& x) {
  for (std::size_t i = 0; i < map.attractors.size(); ++i)
    if (distance(map.attractors[i].state, x) < 1e-6) return i;
  ADD_FAILURE() << "no attractor near given point";
  return 0;
}

}  // namespace

TEST(ClassifyGrid, CubicSplitsAtZero) {
  BasinMap map = classify_grid(cubic(), ParamMap{{"mu", 0.0}}, Box{{-2.0, 2.0}}, 400, IntegratorConfig{});
  ASSERT_EQ(map.attractors.size(), 2u);
  ASSERT_EQ(map.cell_count(), 400u);
  const int left = static_cast<int>(index_of_attractor_near(map, Vec{-1.0}));
  const int right = static_cast<int>(index_of_attractor_near(map, Vec{1.0}));
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    double c = map.center(i)[0];
    if (std::fabs(c) < map.cell_width(0)) {
      EXPECT_TRUE(map.labels[i] == kUnresolved || map.labels[i] == (c < 0 ? left : right));
    } else {
      EXPECT_EQ(map.labels[i], c < 0 ? left : right) << "cell centre " << c;
    }
  }
}

TEST(ClassifyGrid, DoubleWellHalfPlanes) {
  BasinMap map = classify_grid(well(), ParamMap{}, Box{{-2, 2}, {-2, 2}}, 100, IntegratorConfig{});
  ASSERT_EQ(map.attractors.size(), 2u);
  const int left = static_cast<int>(index_of_attractor_near(map, Vec{-1.0, 0.0}));
  const int right = static_cast<int>(index_of_attractor_near(map, Vec{1.0, 0.0}));
  for (std::size_t i = 0; i < map.cell_count(); ++i) {
    Vec c = map.center(i);
    EXPECT_EQ(map.labels[i], c[0] < 0 ? left : right);
  }
  BasinMeasure right_area = basin_measure(map, static_cast<std::size_t>(right));
  EXPECT_NEAR(right_area.volume, 8.0, 0.03 * 8.0);
  EXPECT_TRUE(right_area.touches_boundary);
}

TEST(ClassifyGrid, PastFoldSingleLabel) {
  BasinMap map = classify_grid(cubic(), ParamMap{{"mu", 1.0}}, Box{{-2.0, 2.0}}, 64, IntegratorConfig{});
  ASSERT_EQ(map.attractors.size(), 1u);
  for (int l : map.labels) EXPECT_EQ(l, 0);
  EXPECT_THROW(separatrix_points(map), SingleBasin);
}

TEST(ClassifyGrid, Preconditions) {
  EXPECT_THROW(classify_grid(cubic(), ParamMap{}, Box{{-2.0, 2.0}}, 7, IntegratorConfig{}), Error);
  EXPECT_THROW(classify_grid(cubic(), ParamMap{}, Box{{3.0, 4.0}}, 16, IntegratorConfig{}), NoAttractors);
  SystemModel four("four", {"a", "b", "c", "d"}, {}, {"-a", "-b", "-c", "-d"});
  EXPECT_THROW(classify_grid(four, ParamMap{}, Box(4, Interval{-1, 1}), 8, IntegratorConfig{}), Error);
}

TEST(ClassifyGrid, IndependentOfWorkerCount) {
  ::setenv("BASINSCOPE_THREADS", "0", 1);
  BasinMap seq = classify_grid(well(), ParamMap{}, Box{{-2, 2}, {-2, 2}}, 40, IntegratorConfig{});
  ::setenv("BASINSCOPE_THREADS", "4", 1);
  BasinMap par = classify_grid(well(), ParamMap{}, Box{{-2, 2}, {-2, 2}}, 40, IntegratorConfig{});
  ::unsetenv("BASINSCOPE_THREADS");
  EXPECT_EQ(seq.labels, par.labels);
}

TEST(BasinMeasure, CubicLeftBasin) {
  BasinMap map = classify_grid(cubic(), ParamMap{}, Box{{-2.0, 2.0}}, 400, IntegratorConfig{});
  std::size_t left = index_of_attractor_near(map, Vec{-1.0});
  BasinMeasure m = basin_measure(map, left);
  EXPECT_NEAR(m.volume, 2.0, 2 * map.cell_width(0));
  EXPECT_TRUE(m.touches_boundary);
  EXPECT_THROW(basin_measure(map, 5), Error);
}

TEST(BasinMeasure, EmptyLabel) {
  BasinMap map = classify_grid(cubic(), ParamMap{}, Box{{-2.0, 2.0}}, 32, IntegratorConfig{});
  for (int& l : map.labels) l = 0;
  BasinMeasure m = basin_measure(map, 1);
  EXPECT_EQ(m.volume, 0.0);
  EXPECT_FALSE(m.touches_boundary);
}

TEST(BasinMeasure, RefinementChangesVolumeByLessThanOneCoarseLayer) {
  BasinMap coarse = classify_grid(cubic(), ParamMap{{"mu", 0.2}}, Box{{-2.0, 2.0}}, 50, IntegratorConfig{});
  BasinMap fine = classify_grid(cubic(), ParamMap{{"mu", 0.2}}, Box{{-2.0, 2.0}}, 100, IntegratorConfig{});
  for (std::size_t a = 0; a < 2; ++a)
    EXPECT_LT(std::fabs(basin_measure(coarse, a).volume - basin_measure(fine, a).volume),
              coarse.cell_volume());
  BasinMap c2 = classify_grid(well(), ParamMap{}, Box{{-2, 1.7}, {-2, 2}}, 30, IntegratorConfig{});
  BasinMap f2 = classify_grid(well(), ParamMap{}, Box{{-2, 1.7}, {-2, 2}}, 60, IntegratorConfig{});
  // One coarse-cell layer across the separatrix: cell width in x times box height.
  for (std::size_t a = 0; a < 2; ++a)
    EXPECT_LT(std::fabs(basin_measure(c2, a).volume - basin_measure(f2, a).volume),
              c2.cell_width(0) * 4.0);
}

TEST(Separatrix, CubicNearZero) {
  BasinMap map = classify_grid(cubic(), ParamMap{}, Box{{-2.0, 2.0}}, 400, IntegratorConfig{});
  SeparatrixEstimate sep = separatrix_points(map);
  ASSERT_FALSE(sep.points.empty());
  for (const auto& p : sep.points) EXPECT_LE(std::fabs(p[0]), map.cell_width(0));
}

TEST(Separatrix, DoubleWellNearLineXZero) {
  BasinMap map = classify_grid(well(), ParamMap{}, Box{{-2, 2}, {-2, 2}}, 100, IntegratorConfig{});
  SeparatrixEstimate sep = separatrix_points(map);
  ASSERT_FALSE(sep.points.empty());
  for (const auto& p : sep.points) {
    EXPECT_LE(std::fabs(p[0]), sep.cell_diameter);
    EXPECT_LE(std::fabs(p[1]), 2.0);
  }
}

TEST(Separatrix, PointsSplitAlongLabelGradient) {
  const SystemModel& m = cubic();
  VectorField f(m, ParamMap{{"mu", 0.25}});
  BasinMap map = classify_grid(f, Box{{-2.0, 2.0}}, 120, IntegratorConfig{});
  SeparatrixEstimate sep = separatrix_points(map);
  auto attr = states_of(map.attractors);
  for (const auto& p : sep.points) {
    SettleResult lo = settle(f, Vec{p[0] - sep.cell_diameter}, IntegratorConfig{}, attr);
    SettleResult hi = settle(f, Vec{p[0] + sep.cell_diameter}, IntegratorConfig{}, attr);
    ASSERT_EQ(lo.verdict, Verdict::Settled);
    ASSERT_EQ(hi.verdict, Verdict::Settled);
    EXPECT_NE(lo.attractor, hi.attractor);
  }
}

TEST(Separatrix, UnresolvedCellsDoNotGeneratePoints) {
  BasinMap map = classify_grid(cubic(), ParamMap{}, Box{{-2.0, 2.0}}, 16, IntegratorConfig{});
  // Insert an unresolved cell between the two basins.
  map.labels.assign(16, 0);
  for (std::size_t i = 9; i < 16; ++i) map.labels[i] = 1;
  map.labels[8] = kUnresolved;
  EXPECT_TRUE(separatrix_points(map).points.empty());
  map.labels[8] = 1;
  auto sep = separatrix_points(map);
  ASSERT_EQ(sep.points.size(), 1u);
  EXPECT_DOUBLE_EQ(sep.points[0][0], 0.0);
}

TEST(ThresholdDistance, Examples) {
  BasinMap map = classify_grid(cubic(), ParamMap{}, Box{{-2.0, 2.0}}, 400, IntegratorConfig{});
  SeparatrixEstimate sep = separatrix_points(map);
  ThresholdDistance d = distance_to_threshold(Vec{-1.0}, sep);
  EXPECT_NEAR(d.distance, 1.0, map.cell_width(0));
  EXPECT_DOUBLE_EQ(d.uncertainty, map.cell_diameter());
  EXPECT_NEAR(distance_to_threshold(Vec{-0.2}, sep).distance, 0.2, map.cell_width(0));

  BasinMap wmap = classify_grid(well(), ParamMap{}, Box{{-2, 2}, {-2, 2}}, 100, IntegratorConfig{});
  SeparatrixEstimate wsep = separatrix_points(wmap);
  EXPECT_NEAR(distance_to_threshold(Vec{-1.0, 0.0}, wsep).distance, 1.0, wsep.cell_diameter);
  EXPECT_THROW(distance_to_threshold(Vec{0.0}, SeparatrixEstimate{}), SingleBasin);
}

TEST(ThresholdDistance, LeftBasinShrinksWithMu) {
  double prev = INFINITY;
  for (double mu : {-0.2, 0.0, 0.2, 0.3}) {
    BasinMap map = classify_grid(cubic(), ParamMap{{"mu", mu}}, Box{{-2.0, 2.0}}, 400, IntegratorConfig{});
    SeparatrixEstimate sep = separatrix_points(map);
    double xs = cubic_root(mu, -2.0, -1.0 / std::sqrt(3.0));
    double xu = cubic_root(mu, -1.0 / std::sqrt(3.0), 1.0 / std::sqrt(3.0));
    double d = distance_to_threshold(Vec{xs}, sep).distance;
    EXPECT_NEAR(d, xu - xs, map.cell_width(0)) << "mu=" << mu;
    EXPECT_LT(d, prev);
    prev = d;
  }
}

TEST(DirectionalDistance, Examples) {
  IntegratorConfig cfg;
  DirectionalDistance right = directional_distance(cubic(), ParamMap{}, Vec{-1.0}, Vec{1.0}, cfg, 10.0);
  ASSERT_EQ(right.status, DirectionalDistance::Status::Found);
  EXPECT_NEAR(right.distance, 1.0, 1e-5);

  DirectionalDistance left = directional_distance(cubic(), ParamMap{}, Vec{-1.0}, Vec{-1.0}, cfg, 10.0);
  EXPECT_EQ(left.status, DirectionalDistance::Status::NoEscape);

  double xs = cubic_root(0.3, -2.0, -0.6), xu = cubic_root(0.3, -0.6, 0.0);
  DirectionalDistance d3 = directional_distance(cubic(), ParamMap{{"mu", 0.3}}, Vec{xs}, Vec{1.0}, cfg, 10.0);
  ASSERT_EQ(d3.status, DirectionalDistance::Status::Found);
  EXPECT_NEAR(d3.distance, xu - xs, 1e-5);
  // Roots -0.786483 and -0.338936 of x^3 - x - 0.3.
  EXPECT_NEAR(d3.distance, 0.447546, 1e-5);
}

TEST(DirectionalDistance, RequiresUnitDirection) {
  EXPECT_THROW(directional_distance(cubic(), ParamMap{}, Vec{-1.0}, Vec{2.0}, IntegratorConfig{}, 10.0),
               Error);
  EXPECT_THROW(directional_distance(cubic(), ParamMap{}, Vec{-1.0}, Vec{1.0}, IntegratorConfig{}, 0.0),
               Error);
}

TEST(DirectionalDistance, AgreesWithGridThreshold) {
  for (double mu : {0.0, 0.2}) {
    BasinMap map = classify_grid(cubic(), ParamMap{{"mu", mu}}, Box{{-2.0, 2.0}}, 200, IntegratorConfig{});
    SeparatrixEstimate sep = separatrix_points(map);
    Vec xs = map.attractors.front().state;
    double grid = distance_to_threshold(xs, sep).distance;
    DirectionalDistance dd = directional_distance(cubic(), ParamMap{{"mu", mu}}, xs, Vec{1.0},
                                                  IntegratorConfig{}, 5.0);
    ASSERT_EQ(dd.status, DirectionalDistance::Status::Found);
    EXPECT_NEAR(grid, dd.distance, map.cell_width(0));
  }
}

TEST(DirectionalDistance, DoubleWellDiagonal) {
  const double s = 1.0 / std::sqrt(2.0);
  DirectionalDistance dd = directional_distance(well(), ParamMap{}, Vec{-1.0, 0.0}, Vec{s, s},
                                                IntegratorConfig{}, 5.0);
  ASSERT_EQ(dd.status, DirectionalDistance::Status::Found);
  // The separatrix is x = 0, reached after travelling sqrt(2) along the diagonal.
  EXPECT_NEAR(dd.distance, std::sqrt(2.0), 1e-4);
}

TEST(BasinTable, CsvLayout) {
  BasinMap map = classify_grid(well(), ParamMap{}, Box{{-2, 2}, {-2, 2}}, 8, IntegratorConfig{});
  std::ostringstream os;
  write_csv(os, basin_table(well().state(), map));
  std::istringstream in(os.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "i_x,i_y,x,y,label");
  std::getline(in, line);
  EXPECT_EQ(line, "0,0,-1.75,-1.75,0");
  std::getline(in, line);
  EXPECT_EQ(line, "1,0,-1.25,-1.75,0");
  int rows = 2;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 64);
}
