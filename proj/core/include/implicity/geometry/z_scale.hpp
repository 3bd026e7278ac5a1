// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <span>

#include "implicity/geometry/raster_grid.hpp"

namespace implicity {

inline constexpr double kMinZScale = 1e-6;
inline constexpr std::size_t kMinUsablePatches = 100;

/// Mean of per-patch height standard deviations after discarding values below the 5th
/// and above the 95th percentile. Throws InvalidArgument with fewer than 100 values and
/// NumericError when the result is below 1e-6 m.
double robust_mean_std(std::span<const double> patch_stds);

/// Global vertical normalization factor from `n_patches` random square patches of side
/// `patch_side` inside `region` of the height raster. Nodata cells are skipped; patches
/// with fewer than two valid cells are unusable.
double compute_global_z_scale(const RasterGrid& heights, const Rect& region, std::size_t n_patches,
                              double patch_side, std::uint64_t seed);

}  // namespace implicity
