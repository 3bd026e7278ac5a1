// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "implicity/dsm/fusion.hpp"
#include "implicity/model/occupancy_model.hpp"
#include "implicity/scene/render.hpp"
#include "implicity/scene/scene.hpp"
#include "implicity/sensor/point_cloud.hpp"
#include "implicity/sensor/simulate.hpp"

namespace implicity {

struct SceneBundleConfig {
  SceneConfig scene;
  SensorConfig sensor;
  FusionConfig fusion;
  OrthoConfig ortho;
};

/// One synthetic district with every derived product on the fusion grid. The ortho pair
/// is rectified with the conventional DSM, so its displacement follows that DSM's errors.
struct SceneBundle {
  SceneModel scene;
  GridSpec grid;
  ReferenceProducts ref;
  PointCloud cloud;
  RasterGrid conventional;
  OrthoPair ortho;
  std::array<const RasterGrid*, 2> views() const { return {&ortho.views[0], &ortho.views[1]}; }
};

/// Sensor and ortho seeds are derived from `seed`, overriding the configs' own.
SceneBundle build_scene_bundle(std::uint64_t seed, const SceneBundleConfig& cfg);

/// Equal-width strips along x. Strips val_index and test_index are held out; the rest
/// (which must be contiguous) train. Strip edges are rounded to multiples of `snap` so
/// they fall on raster cell boundaries.
struct StripSplit {
  std::vector<Rect> train;
  Rect train_bounds;
  Rect val;
  Rect test;
};
StripSplit strip_split(const Rect& extent, int strips = 5, int val_index = 3, int test_index = 4,
                       double snap = 0.25);

/// Sets cfg.z_scale from the conventional DSM over the training region and the image
/// mean/std from both ortho views' pixels there.
void fit_normalization(ModelConfig& cfg, const RasterGrid& conventional, std::array<const RasterGrid*, 2> views,
                       const Rect& train_region, std::uint64_t seed);

}  // namespace implicity
