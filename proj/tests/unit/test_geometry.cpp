// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <random>
#include <sstream>

#include "implicity/common/error.hpp"
#include "implicity/geometry/feature_plane.hpp"
#include "implicity/geometry/patch_window.hpp"
#include "implicity/geometry/raster_grid.hpp"
#include "implicity/geometry/raster_io.hpp"
#include "implicity/geometry/z_scale.hpp"

using namespace implicity;

namespace {

RasterGrid random_grid(int rows, int cols, std::uint64_t seed) {
  RasterGrid g(GridSpec{10.0, -5.0, 0.25, rows, cols});
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-50, 450);
  for (auto& v : g.values()) v = u(rng);
  g.at(0, 0) = g.nodata();
  return g;
}

std::filesystem::path tmp(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("implicity_geom_" + name);
}

}  // namespace

TEST(RasterGrid, CoveringRequiresWholeCells) {
  const GridSpec g = GridSpec::covering({0, 0, 8, 4}, 0.25);
  EXPECT_EQ(g.cols, 32);
  EXPECT_EQ(g.rows, 16);
  EXPECT_THROW(GridSpec::covering({0, 0, 8.1, 4}, 0.25), InvalidArgument);
}

TEST(RasterGrid, RowZeroIsSouth) {
  RasterGrid g(GridSpec{0, 0, 1.0, 4, 3});
  const Vec2 c = g.cell_center(0, 2);
  EXPECT_DOUBLE_EQ(c.x, 2.5);
  EXPECT_DOUBLE_EQ(c.y, 0.5);
  const auto [r, col] = g.world_to_cell(2.7, 3.2);
  EXPECT_EQ(r, 3);
  EXPECT_EQ(col, 2);
}

TEST(RasterGrid, CropKeepsValues) {
  const RasterGrid g = random_grid(16, 20, 1);
  const RasterGrid c = g.crop({11.0, -4.0, 13.0, -3.0});
  ASSERT_EQ(c.rows(), 4);
  ASSERT_EQ(c.cols(), 8);
  EXPECT_EQ(c.at(0, 0), g.at(4, 4));
  EXPECT_EQ(c.at(3, 7), g.at(7, 11));
  EXPECT_THROW(g.crop({10.1, -5, 12, -3}), InvalidArgument);
}

TEST(RasterIo, AsciiRoundTripIsExact) {
  const RasterGrid g = random_grid(7, 9, 2);
  std::stringstream ss;
  write_ascii_grid(g, ss);
  const RasterGrid h = read_ascii_grid(ss);
  ASSERT_EQ(h.spec(), g.spec());
  for (std::size_t i = 0; i < g.values().size(); ++i) EXPECT_EQ(h.values()[i], g.values()[i]);
}

TEST(RasterIo, BinaryRoundTripIsFloatExact) {
  const RasterGrid g = random_grid(5, 6, 3);
  const auto p = tmp("rt.irg");
  write_grid(g, p);
  const RasterGrid h = read_grid(p);
  ASSERT_EQ(h.spec(), g.spec());
  for (std::size_t i = 0; i < g.values().size(); ++i)
    EXPECT_EQ(h.values()[i], static_cast<double>(static_cast<float>(g.values()[i])));
  std::filesystem::remove(p);
}

TEST(RasterIo, RejectsTruncatedAscii) {
  std::stringstream ss("ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2 3\n4 5\n");
  EXPECT_THROW(read_ascii_grid(ss), FormatError);
}

TEST(PatchWindow, NormalizeRoundTrip) {
  PatchWindow w;
  w.origin = {100, 200};
  w.side = 64;
  w.z_center = 400;
  w.z_scale = 3.5;
  const Vec3 p{131.5, 263.0, 411.2};
  const Vec3 n = w.normalize(p);
  EXPECT_NEAR(n.x, 0.4921875, 1e-15);
  EXPECT_NEAR(n.y, 0.984375, 1e-15);
  const Vec3 q = w.denormalize(n);
  EXPECT_NEAR(q.x, p.x, 1e-12);
  EXPECT_NEAR(q.y, p.y, 1e-12);
  EXPECT_NEAR(q.z, p.z, 1e-12);
}

TEST(PatchWindow, CenterIsLowerMedianOfInsidePoints) {
  const std::vector<Vec3> pts{{1, 1, 10}, {2, 2, 30}, {3, 3, 20}, {4, 4, 40}, {100, 100, -5}};
  const PatchWindow w = make_window({0, 0}, 64, pts, 2.0);
  EXPECT_EQ(w.z_center, 20.0);
  EXPECT_THROW(make_window({500, 500}, 64, pts, 2.0), InvalidArgument);
  EXPECT_THROW(lower_median({}), InvalidArgument);
}

TEST(ZScale, RobustMeanDropsTails) {
  std::vector<double> s(100);
  for (int i = 0; i < 100; ++i) s[static_cast<std::size_t>(i)] = i;
  // Keeps the 5th..95th percentile band; symmetric, so the mean stays near 49.5.
  EXPECT_NEAR(robust_mean_std(s), 49.5, 0.6);
  EXPECT_THROW(robust_mean_std(std::vector<double>(99, 1.0)), InvalidArgument);
  EXPECT_THROW(robust_mean_std(std::vector<double>(200, 0.0)), NumericError);
}

TEST(ZScale, FlatRasterIsDegenerate) {
  RasterGrid g(GridSpec::covering({0, 0, 128, 128}, 0.5), 7.0);
  EXPECT_THROW(compute_global_z_scale(g, {0, 0, 128, 128}, 200, 64, 1), NumericError);
}

TEST(FeaturePlane, BilinearReproducesLinearFields) {
  FeaturePlane fp(PlaneGeometry{{0, 0}, 0.5, 8, 8}, 2);
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      fp.value(r, c, 0) = static_cast<float>(2.0 * (c + 0.5) * 0.5 + 1.0);
      fp.value(r, c, 1) = static_cast<float>(-(r + 0.5) * 0.5);
    }
  const auto v = bilinear_sample(fp, {1.3, 2.2});
  EXPECT_NEAR(v[0], 2 * 1.3 + 1, 1e-6);
  EXPECT_NEAR(v[1], -2.2, 1e-6);
  EXPECT_THROW(bilinear_sample(fp, {-1.0, 0.0}), InvalidArgument);
}
