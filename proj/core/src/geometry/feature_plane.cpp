// SPDX-License-Identifier: Apache-2.0
#include "implicity/geometry/feature_plane.hpp"

#include <algorithm>
#include <cmath>

#include "implicity/common/error.hpp"

namespace implicity {
namespace {

// Continuous cell-center coordinate along one axis, clamped; returns base index and
// fractional offset.
std::pair<int, double> axis_coord(double pos, double origin, double cell, int n, const char* axis) {
  const double u = (pos - origin) / cell - 0.5;
  if (u < -1.0 || u > static_cast<double>(n))
    throw InvalidArgument(std::string("bilinear query outside plane along ") + axis);
  const double clamped = std::clamp(u, 0.0, static_cast<double>(n - 1));
  if (n == 1) return {0, 0.0};
  const int i0 = std::min(static_cast<int>(std::floor(clamped)), n - 2);
  return {i0, clamped - i0};
}

}  // namespace

BilinearStencil bilinear_stencil(const PlaneGeometry& g, Vec2 xy) {
  if (!std::isfinite(xy.x) || !std::isfinite(xy.y)) throw InvalidArgument("non-finite bilinear query");
  const auto [c0, fx] = axis_coord(xy.x, g.origin.x, g.cell_size, g.w, "x");
  const auto [r0, fy] = axis_coord(xy.y, g.origin.y, g.cell_size, g.h, "y");
  const int c1 = std::min(c0 + 1, g.w - 1);
  const int r1 = std::min(r0 + 1, g.h - 1);
  BilinearStencil s;
  s.index = {r0 * g.w + c0, r0 * g.w + c1, r1 * g.w + c0, r1 * g.w + c1};
  s.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  return s;
}

FeaturePlane::FeaturePlane(const PlaneGeometry& g, int dim) : geometry(g), d(dim) {
  if (g.h < 1 || g.w < 1 || dim < 1 || !(g.cell_size > 0.0))
    throw InvalidArgument("invalid feature plane dimensions");
  data.assign(static_cast<std::size_t>(g.h) * g.w * dim, 0.0f);
}

bool FeaturePlane::all_finite() const {
  return std::all_of(data.begin(), data.end(), [](float v) { return std::isfinite(v); });
}

std::vector<double> bilinear_sample(const FeaturePlane& plane, Vec2 xy) {
  const auto s = bilinear_stencil(plane.geometry, xy);
  const std::size_t hw = static_cast<std::size_t>(plane.geometry.h) * plane.geometry.w;
  std::vector<double> code(plane.d, 0.0);
  for (int c = 0; c < plane.d; ++c) {
    const float* ch = plane.data.data() + c * hw;
    double acc = 0.0;
    for (int k = 0; k < 4; ++k) acc += s.weight[k] * ch[s.index[k]];
    code[c] = acc;
  }
  return code;
}

}  // namespace implicity
