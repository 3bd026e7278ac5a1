// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "implicity/geometry/patch_window.hpp"
#include "implicity/geometry/raster_grid.hpp"
#include "implicity/model/occupancy_model.hpp"
#include "implicity/sensor/point_cloud.hpp"

namespace implicity {

/// Network-ready inputs of one square window.
struct WindowInputs {
  PatchWindow window;
  nn::Mat<float> points;  // [N x 3], normalized
  nn::Mat<float> images;  // [channels x S*S], normalized; empty for the zero variant
};

/// Samples the ortho views at the S x S pixel centers of `window` (bilinear, border
/// clamped; exact copy when the lattices coincide) and applies the model's image
/// normalization. Mono uses views[0] only.
nn::Mat<float> image_patch(std::span<const RasterGrid* const> views, const Rect& window, const ModelConfig& cfg);

/// Points of the window (z_center = lower median of their heights, z_scale from cfg)
/// plus the image patch. Throws InvalidArgument on an empty window.
WindowInputs prepare_window(const PointIndex& index, std::span<const RasterGrid* const> views, const Rect& window,
                            const ModelConfig& cfg);

/// Queries normalized to the window, as a float matrix.
nn::Mat<float> normalized_queries(std::span<const Vec3> queries, const PatchWindow& window);

/// Bilinear sample of a raster at (x, y) using cell-center anchors, clamped at the border.
double sample_bilinear(const RasterGrid& g, double x, double y);

}  // namespace implicity
