// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <sstream>

#include "implicity/common/error.hpp"
#include "implicity/scene/scene.hpp"
#include "implicity/sensor/simulate.hpp"

using namespace implicity;

namespace {

SceneModel small_scene() {
  SceneConfig sc;
  sc.width = 96;
  sc.height = 96;
  return generate_scene(7, sc);
}

}  // namespace

TEST(Sensor, NoiselessCloudSitsOnTheSurface) {
  const SceneModel s = small_scene();
  SensorConfig c;
  c.noise_sigma_z = 0;
  c.noise_sigma_xy = 0;
  c.outlier_fraction = 0;
  c.forest_extra_sigma = 0;
  c.edge_fattening = 0;
  c.occlusion_pairs = 0;
  const PointCloud pc = simulate_point_cloud(s, c);
  const double expected = c.density * 96 * 96;
  EXPECT_NEAR(static_cast<double>(pc.size()), expected, 5 * std::sqrt(expected));
  for (const auto& p : pc.points) ASSERT_EQ(p.z, s.surface(p.x, p.y));
}

TEST(Sensor, OcclusionOnlyRemovesPoints) {
  const SceneModel s = small_scene();
  SensorConfig open;
  open.occlusion_pairs = 0;
  SensorConfig occluded;
  const auto a = simulate_point_cloud(s, open);
  const auto b = simulate_point_cloud(s, occluded);
  EXPECT_LT(b.size(), a.size());
  EXPECT_GT(b.size(), a.size() / 2);
}

TEST(Sensor, DeterministicPerSeed) {
  const SceneModel s = small_scene();
  SensorConfig c;
  c.seed = 3;
  const auto a = simulate_point_cloud(s, c);
  const auto b = simulate_point_cloud(s, c);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) ASSERT_EQ(a.points[i].z, b.points[i].z);
  c.seed = 4;
  EXPECT_NE(simulate_point_cloud(s, c).points[0].z, a.points[0].z);
}

TEST(Sensor, RejectsBadConfig) {
  SensorConfig c;
  c.density = 0;
  EXPECT_THROW(c.validate(), InvalidArgument);
  c = SensorConfig{};
  c.outlier_fraction = 1.5;
  EXPECT_THROW(c.validate(), InvalidArgument);
}

TEST(PointCloudIo, CsvAndBinaryRoundTrip) {
  PointCloud pc;
  pc.points = {{1.5, 2.25, 3.125}, {-4, 5e-9, 1e6}, {0.1, 0.2, 0.3}};
  std::stringstream ss;
  write_point_cloud_csv(pc, ss);
  const PointCloud csv = read_point_cloud_csv(ss);
  ASSERT_EQ(csv.size(), pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_EQ(csv.points[i].z, pc.points[i].z);

  const auto path = std::filesystem::temp_directory_path() / "implicity_test_cloud.ipc";
  write_point_cloud(pc, path);
  const PointCloud bin = read_point_cloud(path);
  ASSERT_EQ(bin.size(), pc.size());
  for (std::size_t i = 0; i < pc.size(); ++i) EXPECT_EQ(bin.points[i].x, pc.points[i].x);
  std::filesystem::remove(path);
}

TEST(PointCloudIo, CsvRejectsNonNumeric) {
  std::stringstream ss("x,y,z\n1,2,abc\n");
  EXPECT_THROW(read_point_cloud_csv(ss), FormatError);
}

TEST(PointIndex, MatchesBruteForce) {
  const SceneModel s = small_scene();
  const PointCloud pc = simulate_point_cloud(s, SensorConfig{});
  const PointIndex idx(pc, 8.0);
  for (const Rect r : {Rect{10, 10, 30, 50}, Rect{-5, -5, 3, 3}, Rect{90, 0, 120, 96}, Rect{0, 0, 96, 96}}) {
    std::size_t brute = 0;
    for (const auto& p : pc.points) brute += p.x >= r.x0 && p.x < r.x1 && p.y >= r.y0 && p.y < r.y1;
    EXPECT_EQ(idx.query(r).size(), brute);
  }
}
