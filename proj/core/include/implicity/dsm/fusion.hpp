// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "implicity/common/kv_config.hpp"
#include "implicity/geometry/raster_grid.hpp"
#include "implicity/sensor/point_cloud.hpp"

namespace implicity {

struct FusionConfig {
  double grid_spacing = 0.25;
  int despike_window = 3;
  double despike_threshold = 5.0;
  double idw_power = 2.0;
  int idw_max_neighbors = 12;

  void validate() const;
  static FusionConfig from_kv(const KvConfig& kv) { return from_kv(kv, FusionConfig()); }
  static FusionConfig from_kv(const KvConfig& kv, const FusionConfig& defaults);
  KvConfig to_kv() const;
};

/// Cell-wise median of the n highest points, n = max(1, round(N / occupied_cells)) with N
/// the number of points falling in the grid. Empty cells are nodata. Throws on an empty
/// cloud or when no point falls inside the grid.
RasterGrid fuse_median(const PointCloud& pc, const FusionConfig& cfg, const GridSpec& grid);

/// Grid aligned to multiples of cfg.grid_spacing that covers every point.
GridSpec grid_for_cloud(const PointCloud& pc, double spacing);

/// Replaces valid cells that deviate from the median of the valid cells in their
/// window by more than the threshold with that median. Nodata cells are left alone.
RasterGrid despike(const RasterGrid& dsm, const FusionConfig& cfg);

/// Fills nodata cells by inverse-distance weighting of the idw_max_neighbors nearest
/// valid cells (cell-center distances). Throws InvalidArgument on an all-nodata grid.
RasterGrid fill_idw(const RasterGrid& dsm, const FusionConfig& cfg);

/// fill_idw(despike(fuse_median(pc))): the conventional baseline DSM.
RasterGrid conventional_dsm(const PointCloud& pc, const FusionConfig& cfg, const GridSpec& grid);

}  // namespace implicity
