// SPDX-License-Identifier: Apache-2.0
#include "implicity/training/dataset.hpp"

#include <cmath>

#include "implicity/common/error.hpp"
#include "implicity/common/rng.hpp"
#include "implicity/eval/metrics.hpp"
#include "implicity/geometry/z_scale.hpp"

namespace implicity {

SceneBundle build_scene_bundle(std::uint64_t seed, const SceneBundleConfig& cfg) {
  SceneBundle b;
  b.scene = generate_scene(seed, cfg.scene);
  b.grid = GridSpec::covering(b.scene.extent(), cfg.fusion.grid_spacing);
  b.ref = render_reference_dsm(b.scene, b.grid);
  SensorConfig sc = cfg.sensor;
  sc.seed = sub_seed(seed, 10);
  b.cloud = simulate_point_cloud(b.scene, sc);
  b.conventional = conventional_dsm(b.cloud, cfg.fusion, b.grid);
  RasterGrid err = error_map(b.conventional, b.ref.dsm);
  OrthoConfig oc = cfg.ortho;
  oc.seed = sub_seed(seed, 11);
  b.ortho = render_ortho_pair(b.scene, b.grid, oc, &err);
  return b;
}

StripSplit strip_split(const Rect& extent, int strips, int val_index, int test_index, double snap) {
  if (strips < 3 || val_index == test_index || val_index < 0 || test_index < 0 || val_index >= strips ||
      test_index >= strips)
    throw InvalidArgument("strip split needs >= 3 strips and distinct val/test indices");
  const double w = extent.width() / strips;
  auto edge = [&](int k) { return extent.x0 + (snap > 0 ? std::round(k * w / snap) * snap : k * w); };
  auto strip = [&](int k) { return Rect{edge(k), extent.y0, edge(k + 1), extent.y1}; };
  StripSplit s;
  s.val = strip(val_index);
  s.test = strip(test_index);
  int first = -1, last = -1;
  for (int k = 0; k < strips; ++k) {
    if (k == val_index || k == test_index) continue;
    if (last >= 0 && k != last + 1) throw InvalidArgument("training strips must be contiguous");
    if (first < 0) first = k;
    last = k;
    s.train.push_back(strip(k));
  }
  s.train_bounds = {strip(first).x0, extent.y0, strip(last).x1, extent.y1};
  return s;
}

void fit_normalization(ModelConfig& cfg, const RasterGrid& conventional, std::array<const RasterGrid*, 2> views,
                       const Rect& train_region, std::uint64_t seed) {
  cfg.z_scale = compute_global_z_scale(conventional, train_region, 1000, kDefaultPatchSide, seed);
  double s1 = 0.0, s2 = 0.0, n = 0.0;
  for (const RasterGrid* v : views) {
    if (!v) continue;
    for (int r = 0; r < v->rows(); ++r)
      for (int c = 0; c < v->cols(); ++c) {
        const Vec2 p = v->cell_center(r, c);
        if (!train_region.contains(p.x, p.y) || !v->valid(r, c)) continue;
        s1 += v->at(r, c);
        s2 += v->at(r, c) * v->at(r, c);
        n += 1.0;
      }
  }
  if (n < 2) {
    cfg.image_mean = 0.0;
    cfg.image_std = 1.0;
    return;
  }
  cfg.image_mean = s1 / n;
  const double var = std::max(0.0, s2 / n - cfg.image_mean * cfg.image_mean);
  cfg.image_std = std::sqrt(var) > 1e-6 ? std::sqrt(var) : 1.0;
}

}  // namespace implicity
