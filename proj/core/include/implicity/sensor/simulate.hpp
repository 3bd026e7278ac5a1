// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>

#include "implicity/common/kv_config.hpp"
#include "implicity/scene/scene.hpp"
#include "implicity/sensor/point_cloud.hpp"

namespace implicity {

struct SensorConfig {
  double density = 4.0;            // points per square meter
  double noise_sigma_z = 0.5;      // meters
  double noise_sigma_xy = 0.25;    // meters
  double outlier_fraction = 0.02;
  double outlier_z_range = 15.0;   // outliers are displaced by U(-range, +range)
  double forest_extra_sigma = 1.5; // added in quadrature to sigma_z over forest
  double xy_lattice = 0.25;        // >0: sample positions snap to this lattice's cell centers
  double edge_fattening = 1.0;     // matcher window: heights are the max of the surface within this radius
  int occlusion_pairs = 3;         // 0 disables visibility culling
  double occlusion_off_nadir_deg = 20.0;
  double occlusion_pair_spread_deg = 40.0;  // azimuth difference inside a pair
  std::uint64_t seed = 0;

  void validate() const;
  static SensorConfig from_kv(const KvConfig& kv) { return from_kv(kv, SensorConfig()); }
  static SensorConfig from_kv(const KvConfig& kv, const SensorConfig& defaults);
  KvConfig to_kv() const;
};

/// Photogrammetric cloud over the scene extent: Poisson-distributed surface samples
/// (z = surface(x,y), x,y optionally snapped to lattice cell centers), then Gaussian noise, inflated sigma_z over forest, and a fraction of
/// outliers. Generated per 32 m tile with independent sub-seeds. Throws InvalidArgument if
/// no point is produced.
PointCloud simulate_point_cloud(const SceneModel& scene, const SensorConfig& cfg);

}  // namespace implicity
