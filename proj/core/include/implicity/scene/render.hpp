// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>

#include "implicity/geometry/raster_grid.hpp"
#include "implicity/scene/scene.hpp"

namespace implicity {

/// Reference DSM and class masks (1 = member, 0 = not), all on the same grid.
struct ReferenceProducts {
  RasterGrid dsm;
  RasterGrid building_mask;
  RasterGrid terrain_mask;
  RasterGrid forest_mask;
  RasterGrid water_mask;
};

/// DSM(x,y) = surface at each cell center; masks are exact point-in-footprint/region tests.
ReferenceProducts render_reference_dsm(const SceneModel& scene, const GridSpec& grid);

struct ViewGeometry {
  double azimuth_deg = 90.0;    // direction towards the sensor, clockwise from north
  double off_nadir_deg = 14.036243467926479;  // tan = 0.25
  double gain = 1.0;
  double bias = 0.0;
};

struct OrthoConfig {
  double sun_azimuth_deg = 135.0;
  double sun_elevation_deg = 50.0;
  std::array<ViewGeometry, 2> views{ViewGeometry{90.0, 14.036243467926479, 1.0, 0.0},
                                    ViewGeometry{270.0, 14.036243467926479, 0.9, 0.04}};
  double noise_sigma = 0.02;
  double ambient = 0.15;
  std::uint64_t seed = 0;
};

/// Two co-registered panchromatic ortho-images in [0,1].
struct OrthoPair {
  std::array<RasterGrid, 2> views;
  std::array<double, 2> gain{};
  std::array<double, 2> bias{};
  double max_warp = 0.0;  // largest horizontal rectification displacement, meters
};

/// Lambertian hillshade times per-surface albedo plus additive noise, rendered once.
/// View k samples that render at (x,y) - e(x,y) * tan(off_nadir_k) * u_k, where e is the
/// rectification height error (nullptr = zero) and u_k the horizontal unit vector towards
/// sensor k; then applies gain_k and bias_k and clamps to [0,1].
OrthoPair render_ortho_pair(const SceneModel& scene, const GridSpec& grid, const OrthoConfig& cfg,
                            const RasterGrid* rect_error);

}  // namespace implicity
