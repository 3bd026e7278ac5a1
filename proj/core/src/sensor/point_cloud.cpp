// SPDX-License-Identifier: Apache-2.0
#include "implicity/sensor/point_cloud.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "implicity/common/error.hpp"

namespace implicity {

bool PointCloud::all_finite() const {
  return std::all_of(points.begin(), points.end(), [](const Vec3& p) {
    return std::isfinite(p.x) && std::isfinite(p.y) && std::isfinite(p.z);
  });
}

void write_point_cloud_csv(const PointCloud& pc, std::ostream& out) {
  char buf[96];
  for (const auto& p : pc.points) {
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g\n", p.x, p.y, p.z);
    out << buf;
  }
}

PointCloud read_point_cloud_csv(std::istream& in) {
  PointCloud pc;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    Vec3 p;
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> p.x >> c1 >> p.y >> c2 >> p.z) || c1 != ',' || c2 != ',') {
      if (lineno == 1) continue;  // header
      throw FormatError("point CSV line " + std::to_string(lineno) + ": expected x,y,z");
    }
    pc.points.push_back(p);
  }
  return pc;
}

void write_point_cloud_ipc(const PointCloud& pc, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open for writing: " + path.string());
  out.write("IPC1", 4);
  auto put_u64 = [&](std::uint64_t v) {
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
    out.write(reinterpret_cast<const char*>(b), 8);
  };
  put_u64(pc.points.size());
  for (const auto& p : pc.points)
    for (double v : {p.x, p.y, p.z}) put_u64(std::bit_cast<std::uint64_t>(v));
  if (!out) throw Error("write failed: " + path.string());
}

PointCloud read_point_cloud_ipc(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open: " + path.string());
  char magic[4];
  unsigned char b[8];
  if (!in.read(magic, 4) || std::memcmp(magic, "IPC1", 4) != 0)
    throw FormatError(path.string() + ": not an IPC1 point cloud");
  auto get_u64 = [&]() {
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw FormatError(path.string() + ": truncated point cloud");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  };
  const std::uint64_t n = get_u64();
  const auto file_size = std::filesystem::file_size(path);
  if (file_size != 12 + n * 24) throw FormatError(path.string() + ": size does not match point count");
  PointCloud pc;
  pc.points.resize(n);
  for (auto& p : pc.points) {
    p.x = std::bit_cast<double>(get_u64());
    p.y = std::bit_cast<double>(get_u64());
    p.z = std::bit_cast<double>(get_u64());
  }
  return pc;
}

void write_point_cloud(const PointCloud& pc, const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ofstream out(path);
    if (!out) throw Error("cannot open for writing: " + path.string());
    write_point_cloud_csv(pc, out);
    if (!out) throw Error("write failed: " + path.string());
  } else {
    write_point_cloud_ipc(pc, path);
  }
}

PointCloud read_point_cloud(const std::filesystem::path& path) {
  if (path.extension() == ".csv") {
    std::ifstream in(path);
    if (!in) throw Error("cannot open: " + path.string());
    return read_point_cloud_csv(in);
  }
  return read_point_cloud_ipc(path);
}

PointIndex::PointIndex(const PointCloud& pc, double bucket) : pc_(&pc), bucket_(bucket) {
  if (pc.empty()) return;
  bounds_ = {1e300, 1e300, -1e300, -1e300};
  for (const auto& p : pc.points) {
    bounds_.x0 = std::min(bounds_.x0, p.x);
    bounds_.y0 = std::min(bounds_.y0, p.y);
    bounds_.x1 = std::max(bounds_.x1, p.x);
    bounds_.y1 = std::max(bounds_.y1, p.y);
  }
  cols_ = static_cast<int>(std::floor(bounds_.width() / bucket_)) + 1;
  rows_ = static_cast<int>(std::floor(bounds_.height() / bucket_)) + 1;
  buckets_.assign(static_cast<std::size_t>(cols_) * rows_, {});
  for (std::uint32_t i = 0; i < pc.points.size(); ++i) {
    const auto& p = pc.points[i];
    const int c = static_cast<int>((p.x - bounds_.x0) / bucket_);
    const int r = static_cast<int>((p.y - bounds_.y0) / bucket_);
    buckets_[r * cols_ + c].push_back(i);
  }
}

std::vector<Vec3> PointIndex::query(const Rect& q) const {
  std::vector<std::uint32_t> hits;
  if (buckets_.empty()) return {};
  const int c0 = std::max(0, static_cast<int>(std::floor((q.x0 - bounds_.x0) / bucket_)));
  const int c1 = std::min(cols_ - 1, static_cast<int>(std::floor((q.x1 - bounds_.x0) / bucket_)));
  const int r0 = std::max(0, static_cast<int>(std::floor((q.y0 - bounds_.y0) / bucket_)));
  const int r1 = std::min(rows_ - 1, static_cast<int>(std::floor((q.y1 - bounds_.y0) / bucket_)));
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c)
      for (std::uint32_t i : buckets_[r * cols_ + c]) {
        const auto& p = pc_->points[i];
        if (p.x >= q.x0 && p.x < q.x1 && p.y >= q.y0 && p.y < q.y1) hits.push_back(i);
      }
  std::sort(hits.begin(), hits.end());
  std::vector<Vec3> out;
  out.reserve(hits.size());
  for (auto i : hits) out.push_back(pc_->points[i]);
  return out;
}

}  // namespace implicity
