// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "implicity/common/error.hpp"
#include "implicity/scene/render.hpp"
#include "implicity/scene/scene.hpp"
#include "implicity/scene/surface_sampling.hpp"

using namespace implicity;

namespace {

const SceneModel& town() {
  static const SceneModel s = generate_scene(42, SceneConfig{});
  return s;
}

}  // namespace

TEST(Scene, GeneratesRoughlyFortyBuildingsWithDormers) {
  const auto& s = town();
  EXPECT_GE(s.buildings().size(), 30u);
  EXPECT_LE(s.buildings().size(), 50u);
  int gables = 0, dormers = 0;
  for (const auto& b : s.buildings()) {
    gables += b.roof != RoofType::Flat;
    dormers += b.roof == RoofType::GableDormer;
  }
  EXPECT_GT(gables, 0);
  EXPECT_GT(dormers, 0);
}

TEST(Scene, DeterministicPerSeed) {
  EXPECT_EQ(serialize_scene(generate_scene(5, SceneConfig{})), serialize_scene(generate_scene(5, SceneConfig{})));
  EXPECT_NE(serialize_scene(generate_scene(5, SceneConfig{})), serialize_scene(generate_scene(6, SceneConfig{})));
}

TEST(Scene, FootprintsDoNotOverlap) {
  const auto& b = town().buildings();
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0, 256);
  for (int i = 0; i < 20000; ++i) {
    const Vec2 p{u(rng), u(rng)};
    int inside = 0;
    for (const auto& x : b) inside += x.contains(p);
    ASSERT_LE(inside, 1);
  }
}

TEST(Scene, SerializationRoundTripsExactly) {
  const std::string a = serialize_scene(town());
  const SceneModel back = parse_scene(a);
  EXPECT_EQ(serialize_scene(back), a);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0, 256);
  for (int i = 0; i < 1000; ++i) {
    const double x = u(rng), y = u(rng);
    ASSERT_EQ(back.surface(x, y), town().surface(x, y));
  }
}

TEST(Scene, ParseRejectsGarbage) { EXPECT_THROW(parse_scene("not a scene"), FormatError); }

TEST(Scene, OracleIsTwoAndAHalfD) {
  const auto& s = town();
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 256);
  for (int i = 0; i < 2000; ++i) {
    const double x = u(rng), y = u(rng), z = s.surface(x, y);
    ASSERT_EQ(occupancy_oracle(s, {x, y, z}), 1);
    ASSERT_EQ(occupancy_oracle(s, {x, y, z - 0.01}), 1);
    ASSERT_EQ(occupancy_oracle(s, {x, y, z + 0.01}), 0);
  }
  EXPECT_THROW(occupancy_oracle(s, {-10, 5, 400}), InvalidArgument);
  EXPECT_THROW(occupancy_oracle(s, {5, 5, s.volume_ceiling() + 1}), InvalidArgument);
}

TEST(Render, ReferenceDsmSamplesSurfaceAtCellCenters) {
  const auto& s = town();
  const GridSpec g = GridSpec::covering({64, 64, 96, 96}, 0.25);
  const auto ref = render_reference_dsm(s, g);
  for (int r = 0; r < g.rows; r += 7)
    for (int c = 0; c < g.cols; c += 5) {
      const Vec2 p = ref.dsm.cell_center(r, c);
      ASSERT_EQ(ref.dsm.at(r, c), s.surface(p.x, p.y));
      ASSERT_EQ(ref.building_mask.at(r, c), s.building_at(p.x, p.y) >= 0 ? 1.0 : 0.0);
      ASSERT_EQ(ref.terrain_mask.at(r, c), 1.0 - ref.building_mask.at(r, c));
    }
}

TEST(Render, OrthoViewsStayInUnitRangeAndDifferWithWarp) {
  const auto& s = town();
  const GridSpec g = GridSpec::covering({0, 0, 64, 64}, 0.25);
  OrthoConfig oc;
  oc.seed = 9;
  const OrthoPair clean = render_ortho_pair(s, g, oc, nullptr);
  RasterGrid err(g, 2.0);
  const OrthoPair warped = render_ortho_pair(s, g, oc, &err);
  EXPECT_DOUBLE_EQ(clean.max_warp, 0.0);
  EXPECT_NEAR(warped.max_warp, 0.5, 1e-9);  // 2 m error times tan(off-nadir) = 0.25
  double diff = 0;
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t i = 0; i < g.size(); ++i) {
      ASSERT_GE(clean.views[k].values()[i], 0.0);
      ASSERT_LE(clean.views[k].values()[i], 1.0);
      diff += std::abs(clean.views[k].values()[i] - warped.views[k].values()[i]);
    }
  EXPECT_GT(diff, 0.0);
}

TEST(SurfaceSampling, SamplesLieOnTheSurfaceInsideRegion) {
  const auto& s = town();
  const Rect region{32, 32, 96, 96};
  SurfaceSampler sampler(s, region);
  Rng rng(11);
  int roofs = 0;
  for (int i = 0; i < 5000; ++i) {
    const auto smp = sampler.sample(rng);
    ASSERT_TRUE(region.contains(smp.point.x, smp.point.y));
    if (smp.kind == SurfaceKind::Roof || smp.kind == SurfaceKind::Terrain) {
      ASSERT_NEAR(smp.point.z, s.surface(smp.point.x, smp.point.y), 1e-9);
    }
    roofs += smp.kind == SurfaceKind::Roof;
  }
  EXPECT_GT(roofs, 0);
}
