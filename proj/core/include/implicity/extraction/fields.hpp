// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>

#include "implicity/extraction/extract.hpp"
#include "implicity/model/occupancy_model.hpp"
#include "implicity/scene/scene.hpp"
#include "implicity/sensor/point_cloud.hpp"

namespace implicity {

/// The analytic scene occupancy as a field (bypasses the network).
class OracleField : public OccupancyField {
 public:
  explicit OracleField(const SceneModel& scene) : scene_(scene) {}
  void begin_window(const Rect&) override { ++windows_; }
  void evaluate(std::span<const Vec3> points, std::span<float> out) const override;
  Rect coverage() const override { return scene_.extent(); }
  /// One meter beyond the scene's height range.
  std::pair<double, double> z_range() const override { return {scene_.z_min() - 1.0, scene_.z_max() + 1.0}; }
  long windows() const { return windows_; }

 private:
  const SceneModel& scene_;
  long windows_ = 0;
};

/// A trained network applied window by window: encodes the window's point cloud and
/// ortho patch once in begin_window, then decodes query batches.
class NetworkField : public OccupancyField {
 public:
  /// views may hold nullptrs for the zero variant. `coverage` defaults to the ortho
  /// extent, or the cloud's bounds rounded outward to whole meters without images.
  NetworkField(const OccupancyNetwork& net, const PointCloud& cloud, std::array<const RasterGrid*, 2> views,
               std::optional<Rect> coverage = std::nullopt);

  void begin_window(const Rect& window) override;
  void evaluate(std::span<const Vec3> points, std::span<float> out) const override;
  Rect coverage() const override { return coverage_; }
  /// 0.1 / 99.9 height percentiles of the cloud, widened by 8 m.
  std::pair<double, double> z_range() const override { return z_range_; }

 private:
  const OccupancyNetwork& net_;
  PointIndex index_;
  std::array<const RasterGrid*, 2> views_;
  Rect coverage_;
  std::pair<double, double> z_range_;
  PatchWindow window_;
  EncodedWindow planes_;
  bool ready_ = false;
};

}  // namespace implicity
