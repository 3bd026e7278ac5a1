// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "implicity/common/error.hpp"
#include "implicity/dsm/fusion.hpp"

using namespace implicity;

namespace {

GridSpec grid(int rows, int cols) { return GridSpec{0.0, 0.0, 0.5, rows, cols}; }

// Every valid cell, sorted by distance then index, top k, inverse-distance weights.
double idw_oracle(const RasterGrid& g, int r, int c, int k, double power) {
  std::vector<std::pair<double, std::size_t>> all;
  for (int i = 0; i < g.rows(); ++i)
    for (int j = 0; j < g.cols(); ++j)
      if (g.valid(i, j)) all.push_back({double(i - r) * (i - r) + double(j - c) * (j - c), g.index(i, j)});
  std::sort(all.begin(), all.end());
  all.resize(std::min<std::size_t>(all.size(), k));
  double num = 0, den = 0;
  for (const auto& [d2, idx] : all) {
    const double w = std::pow(std::sqrt(d2) * g.cell_size(), -power);
    num += w * g.values()[idx];
    den += w;
  }
  return num / den;
}

}  // namespace

TEST(Fusion, OnePointPerCellReproducesHeights) {
  const GridSpec g = grid(20, 30);
  RasterGrid truth(g);
  PointCloud pc;
  for (int r = 0; r < g.rows; ++r)
    for (int c = 0; c < g.cols; ++c) {
      const Vec2 p = truth.cell_center(r, c);
      truth.at(r, c) = std::sin(p.x) * 3 + p.y;
      pc.points.push_back({p.x, p.y, truth.at(r, c)});
    }
  const RasterGrid dsm = conventional_dsm(pc, FusionConfig{}, g);
  for (std::size_t i = 0; i < g.size(); ++i) ASSERT_NEAR(dsm.values()[i], truth.values()[i], 1e-9);
}

TEST(Fusion, MedianOfTopNPerCell) {
  // Average density is 3 points per occupied cell, so each cell keeps its three highest.
  const GridSpec g = grid(1, 2);
  PointCloud pc;
  for (double z : {1.0, 2.0, 3.0, 10.0}) pc.points.push_back({0.25, 0.25, z});
  for (double z : {5.0, 6.0}) pc.points.push_back({0.75, 0.25, z});
  const RasterGrid dsm = fuse_median(pc, FusionConfig{}, g);
  EXPECT_DOUBLE_EQ(dsm.at(0, 0), 3.0);  // median of {10, 3, 2}
  EXPECT_DOUBLE_EQ(dsm.at(0, 1), 5.5);
}

TEST(Fusion, EmptyCellsAreNodataBeforeFill) {
  PointCloud pc;
  pc.points = {{0.25, 0.25, 1.0}};
  const RasterGrid dsm = fuse_median(pc, FusionConfig{}, grid(3, 3));
  EXPECT_EQ(dsm.count_valid(), 1u);
  EXPECT_THROW(fuse_median(PointCloud{}, FusionConfig{}, grid(3, 3)), InvalidArgument);
}

TEST(Despike, ReplacesOnlyOutliers) {
  RasterGrid g(grid(5, 5), 10.0);
  g.at(2, 2) = 40.0;
  g.at(0, 0) = 13.0;  // within threshold
  const RasterGrid out = despike(g, FusionConfig{});
  EXPECT_DOUBLE_EQ(out.at(2, 2), 10.0);
  EXPECT_DOUBLE_EQ(out.at(0, 0), 13.0);
  for (int r = 0; r < 5; ++r)
    for (int c = 0; c < 5; ++c)
      if (!(r == 2 && c == 2)) {
        EXPECT_EQ(out.at(r, c), g.at(r, c));
      }
}

TEST(Despike, IgnoresNodataAndIsIdempotentOnSmoothInput) {
  RasterGrid g(grid(6, 6));
  for (int r = 0; r < 6; ++r)
    for (int c = 0; c < 6; ++c) g.at(r, c) = 0.5 * r + 0.25 * c;
  g.at(3, 3) = g.nodata();
  const RasterGrid out = despike(g, FusionConfig{});
  for (std::size_t i = 0; i < g.values().size(); ++i) EXPECT_EQ(out.values()[i], g.values()[i]);
}

TEST(Idw, MatchesBruteForceAndKeepsValidCells) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0, 1);
  RasterGrid g(grid(24, 19));
  for (auto& v : g.values()) v = u(rng) < 0.3 ? u(rng) * 20 : g.nodata();
  FusionConfig cfg;
  const RasterGrid out = fill_idw(g, cfg);
  double lo = 1e300, hi = -1e300;
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c)
      if (g.valid(r, c)) {
        lo = std::min(lo, g.at(r, c));
        hi = std::max(hi, g.at(r, c));
      }
  for (int r = 0; r < g.rows(); ++r)
    for (int c = 0; c < g.cols(); ++c) {
      if (g.valid(r, c)) {
        ASSERT_EQ(out.at(r, c), g.at(r, c));
        continue;
      }
      const double v = out.at(r, c);
      ASSERT_GE(v, lo);
      ASSERT_LE(v, hi);
      ASSERT_NEAR(v, idw_oracle(g, r, c, cfg.idw_max_neighbors, cfg.idw_power), 1e-9);
    }
}

TEST(Idw, ConstantFieldStaysConstant) {
  RasterGrid g(grid(10, 10), kDefaultNodata);
  g.at(1, 1) = 4.0;
  g.at(8, 3) = 4.0;
  const RasterGrid out = fill_idw(g, FusionConfig{});
  for (double v : out.values()) EXPECT_NEAR(v, 4.0, 1e-12);
  EXPECT_THROW(fill_idw(RasterGrid(grid(3, 3), kDefaultNodata), FusionConfig{}), InvalidArgument);
}

TEST(Fusion, GridForCloudCoversEveryPoint) {
  PointCloud pc;
  pc.points = {{-1.3, 2.2, 0}, {7.9, 5.0, 0}, {3.0, -0.1, 0}};
  const GridSpec g = grid_for_cloud(pc, 0.25);
  for (const auto& p : pc.points) {
    EXPECT_TRUE(g.extent().contains(p.x, p.y));
    EXPECT_LT(p.x, g.extent().x1);
  }
}

TEST(Fusion, ConfigValidation) {
  FusionConfig c;
  c.despike_window = 4;
  EXPECT_THROW(c.validate(), InvalidArgument);
}
