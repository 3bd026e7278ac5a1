// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstddef>
#include <vector>

#include "implicity/geometry/vec.hpp"

namespace implicity {

/// World placement of a cell-centered 2D lattice.
struct PlaneGeometry {
  Vec2 origin;       // lower-left corner, meters
  double cell_size;  // meters
  int h;             // rows (y)
  int w;             // cols (x)

  Rect extent() const { return {origin.x, origin.y, origin.x + w * cell_size, origin.y + h * cell_size}; }
};

/// Four-tap interpolation stencil into a row-major h*w lattice.
struct BilinearStencil {
  std::array<int, 4> index{};
  std::array<double, 4> weight{};
};

/// Stencil for a query at `xy` (same units as the geometry). Queries up to half a cell
/// outside the lattice extent clamp to the border; anything farther, or non-finite,
/// throws InvalidArgument.
BilinearStencil bilinear_stencil(const PlaneGeometry& g, Vec2 xy);

/// h x w x d latent grid; stored channel-major (data[c*h*w + row*w + col]).
struct FeaturePlane {
  PlaneGeometry geometry{};
  int d = 0;
  std::vector<float> data;

  FeaturePlane() = default;
  FeaturePlane(const PlaneGeometry& g, int dim);

  float& value(int row, int col, int c) { return data[index(row, col, c)]; }
  float value(int row, int col, int c) const { return data[index(row, col, c)]; }
  std::size_t index(int row, int col, int c) const {
    return (static_cast<std::size_t>(c) * geometry.h + row) * geometry.w + col;
  }
  bool all_finite() const;
};

/// d-dimensional code at world position `xy` (cell-centered bilinear blend).
std::vector<double> bilinear_sample(const FeaturePlane& plane, Vec2 xy);

}  // namespace implicity
