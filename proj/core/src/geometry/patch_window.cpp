// SPDX-License-Identifier: Apache-2.0
#include "implicity/geometry/patch_window.hpp"

#include <algorithm>

#include "implicity/common/error.hpp"

namespace implicity {

Vec3 PatchWindow::normalize(const Vec3& p) const {
  return {(p.x - origin.x) / side, (p.y - origin.y) / side, (p.z - z_center) / z_scale};
}

Vec3 PatchWindow::denormalize(const Vec3& q) const {
  return {q.x * side + origin.x, q.y * side + origin.y, q.z * z_scale + z_center};
}

double lower_median(std::vector<double> values) {
  if (values.empty()) throw InvalidArgument("median of an empty set");
  const auto mid = values.begin() + static_cast<std::ptrdiff_t>((values.size() - 1) / 2);
  std::nth_element(values.begin(), mid, values.end());
  return *mid;
}

PatchWindow make_window(Vec2 origin, double side, std::span<const Vec3> points, double z_scale) {
  if (!(side > 0.0)) throw InvalidArgument("patch side must be positive");
  if (!(z_scale > 0.0)) throw InvalidArgument("z_scale must be positive");
  const Rect r{origin.x, origin.y, origin.x + side, origin.y + side};
  std::vector<double> heights;
  for (const auto& p : points)
    if (r.contains(p.x, p.y)) heights.push_back(p.z);
  if (heights.empty()) throw InvalidArgument("no input points inside the patch window");
  PatchWindow w;
  w.origin = origin;
  w.side = side;
  w.z_center = lower_median(std::move(heights));
  w.z_scale = z_scale;
  return w;
}

std::vector<Vec3> normalize_points(std::span<const Vec3> points, const PatchWindow& window) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(window.normalize(p));
  return out;
}

std::vector<Vec3> denormalize_points(std::span<const Vec3> points, const PatchWindow& window) {
  std::vector<Vec3> out;
  out.reserve(points.size());
  for (const auto& p : points) out.push_back(window.denormalize(p));
  return out;
}

}  // namespace implicity
