// SPDX-License-Identifier: Apache-2.0
#include "implicity/extraction/fields.hpp"

#include <algorithm>
#include <cmath>

#include "implicity/common/error.hpp"
#include "implicity/common/parallel.hpp"
#include "implicity/model/window_inputs.hpp"

namespace implicity {

void OracleField::evaluate(std::span<const Vec3> points, std::span<float> out) const {
  for (std::size_t i = 0; i < points.size(); ++i)
    out[i] = points[i].z <= scene_.surface(points[i].x, points[i].y) ? 1.0f : 0.0f;
}

namespace {

std::pair<double, double> cloud_z_range(const PointCloud& cloud) {
  if (cloud.empty()) throw InvalidArgument("empty point cloud");
  std::vector<double> z;
  z.reserve(cloud.size());
  for (const auto& p : cloud.points) z.push_back(p.z);
  auto pick = [&](double q) {
    const auto k = static_cast<std::size_t>(std::floor(q * static_cast<double>(z.size() - 1)));
    std::nth_element(z.begin(), z.begin() + static_cast<std::ptrdiff_t>(k), z.end());
    return z[k];
  };
  const double lo = pick(0.001);
  const double hi = pick(0.999);
  return {lo - 8.0, hi + 8.0};
}

}  // namespace

NetworkField::NetworkField(const OccupancyNetwork& net, const PointCloud& cloud, std::array<const RasterGrid*, 2> views,
                           std::optional<Rect> coverage)
    : net_(net), index_(cloud), views_(views), z_range_(cloud_z_range(cloud)) {
  const int need = net.config().image_channels();
  if (net.config().variant != Variant::Zero)
    for (int k = 0; k < need; ++k)
      if (!views_[static_cast<std::size_t>(k)]) throw InvalidArgument("variant needs ortho view " + std::to_string(k));
  if (coverage) {
    coverage_ = *coverage;
  } else if (views_[0]) {
    coverage_ = views_[0]->spec().extent();
  } else {
    const Rect b = index_.bounds();
    coverage_ = {std::floor(b.x0), std::floor(b.y0), std::ceil(b.x1), std::ceil(b.y1)};
  }
}

void NetworkField::begin_window(const Rect& window) {
  const WindowInputs in = prepare_window(index_, views_, window, net_.config());
  window_ = in.window;
  planes_ = net_.encode(in.points, in.images);
  ready_ = true;
}

void NetworkField::evaluate(std::span<const Vec3> points, std::span<float> out) const {
  if (!ready_) throw InvalidArgument("evaluate called before begin_window");
  constexpr std::size_t kChunk = 2048;
  parallel_for((points.size() + kChunk - 1) / kChunk, 1, [&](std::size_t b, std::size_t e) {
    for (std::size_t k = b; k < e; ++k) {
      const std::size_t s = k * kChunk;
      const std::size_t n = std::min(kChunk, points.size() - s);
      const auto p = net_.decode(planes_, normalized_queries(points.subspan(s, n), window_));
      std::copy(p.begin(), p.end(), out.begin() + static_cast<std::ptrdiff_t>(s));
    }
  });
}

}  // namespace implicity
