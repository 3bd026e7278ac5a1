// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>
#include <vector>

#include "implicity/geometry/vec.hpp"

namespace implicity {

/// Unordered 3D points in local metric coordinates.
struct PointCloud {
  std::vector<Vec3> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  bool all_finite() const;
};

/// CSV `x,y,z`, one point per line; an optional non-numeric header line is skipped.
void write_point_cloud_csv(const PointCloud& pc, std::ostream& out);
PointCloud read_point_cloud_csv(std::istream& in);

/// Binary "IPC1": 4-byte magic, little-endian u64 count, count*3 little-endian f64.
void write_point_cloud_ipc(const PointCloud& pc, const std::filesystem::path& path);
PointCloud read_point_cloud_ipc(const std::filesystem::path& path);

/// Dispatches on extension: ".csv" text, anything else IPC1.
void write_point_cloud(const PointCloud& pc, const std::filesystem::path& path);
PointCloud read_point_cloud(const std::filesystem::path& path);

/// Bucket grid for rectangular window queries.
class PointIndex {
 public:
  PointIndex(const PointCloud& pc, double bucket = 8.0);
  /// Points with x in [r.x0, r.x1) and y in [r.y0, r.y1), in ascending original order.
  std::vector<Vec3> query(const Rect& r) const;
  const Rect& bounds() const { return bounds_; }

 private:
  const PointCloud* pc_;
  Rect bounds_{};
  double bucket_;
  int cols_ = 1;
  int rows_ = 1;
  std::vector<std::vector<std::uint32_t>> buckets_;
};

}  // namespace implicity
