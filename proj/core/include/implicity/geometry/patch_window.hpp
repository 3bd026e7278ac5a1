// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <vector>

#include "implicity/geometry/vec.hpp"

namespace implicity {

inline constexpr double kDefaultPatchSide = 64.0;

/// A square training/inference patch and its coordinate normalization.
/// Horizontal: (x - origin) / side maps the patch onto [0,1]^2.
/// Vertical:   (z - z_center) / z_scale.
struct PatchWindow {
  Vec2 origin;
  double side = kDefaultPatchSide;
  double z_center = 0.0;
  double z_scale = 1.0;

  double xy_scale() const { return 1.0 / side; }
  Rect extent() const { return {origin.x, origin.y, origin.x + side, origin.y + side}; }

  Vec3 normalize(const Vec3& p) const;
  Vec3 denormalize(const Vec3& q) const;
  double normalize_z(double z) const { return (z - z_center) / z_scale; }
  double denormalize_z(double zn) const { return zn * z_scale + z_center; }
};

/// Window whose z_center is the median height of the points falling inside it.
/// Throws InvalidArgument when no point lies in the window.
PatchWindow make_window(Vec2 origin, double side, std::span<const Vec3> points, double z_scale);

std::vector<Vec3> normalize_points(std::span<const Vec3> points, const PatchWindow& window);
std::vector<Vec3> denormalize_points(std::span<const Vec3> points, const PatchWindow& window);

/// Lower median; throws on empty input.
double lower_median(std::vector<double> values);

}  // namespace implicity
