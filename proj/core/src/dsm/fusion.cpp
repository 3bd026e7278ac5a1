// SPDX-License-Identifier: Apache-2.0
#include "implicity/dsm/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "implicity/common/error.hpp"
#include "implicity/common/parallel.hpp"

namespace implicity {
namespace {

double median_inplace(std::vector<double>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  if (n % 2 == 1) return *mid;
  const double hi = *mid;
  const double lo = *std::max_element(v.begin(), mid);
  return 0.5 * (lo + hi);
}

}  // namespace

void FusionConfig::validate() const {
  if (!(grid_spacing > 0)) throw InvalidArgument("fusion grid_spacing must be positive");
  if (despike_window < 1 || despike_window % 2 == 0) throw InvalidArgument("despike_window must be odd");
  if (!(despike_threshold >= 0)) throw InvalidArgument("despike_threshold must be non-negative");
  if (!(idw_power > 0)) throw InvalidArgument("idw_power must be positive");
  if (idw_max_neighbors < 1) throw InvalidArgument("idw_max_neighbors must be >= 1");
}

FusionConfig FusionConfig::from_kv(const KvConfig& kv, const FusionConfig& d) {
  FusionConfig c = d;
  c.grid_spacing = kv.get_double("fusion.grid_spacing", d.grid_spacing);
  c.despike_window = static_cast<int>(kv.get_int("fusion.despike_window", d.despike_window));
  c.despike_threshold = kv.get_double("fusion.despike_threshold", d.despike_threshold);
  c.idw_power = kv.get_double("fusion.idw_power", d.idw_power);
  c.idw_max_neighbors = static_cast<int>(kv.get_int("fusion.idw_max_neighbors", d.idw_max_neighbors));
  return c;
}

KvConfig FusionConfig::to_kv() const {
  KvConfig kv;
  kv.set("fusion.grid_spacing", format_double(grid_spacing));
  kv.set("fusion.despike_window", std::to_string(despike_window));
  kv.set("fusion.despike_threshold", format_double(despike_threshold));
  kv.set("fusion.idw_power", format_double(idw_power));
  kv.set("fusion.idw_max_neighbors", std::to_string(idw_max_neighbors));
  return kv;
}

GridSpec grid_for_cloud(const PointCloud& pc, double spacing) {
  if (pc.empty()) throw InvalidArgument("cannot derive a grid from an empty cloud");
  double x0 = 1e300, y0 = 1e300, x1 = -1e300, y1 = -1e300;
  for (const auto& p : pc.points) {
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  GridSpec g;
  g.cell_size = spacing;
  g.x0 = std::floor(x0 / spacing) * spacing;
  g.y0 = std::floor(y0 / spacing) * spacing;
  g.cols = static_cast<int>(std::floor((x1 - g.x0) / spacing)) + 1;
  g.rows = static_cast<int>(std::floor((y1 - g.y0) / spacing)) + 1;
  return g;
}

RasterGrid fuse_median(const PointCloud& pc, const FusionConfig& cfg, const GridSpec& grid) {
  cfg.validate();
  if (pc.empty()) throw InvalidArgument("cannot fuse an empty point cloud");
  RasterGrid dsm(grid, kDefaultNodata);
  std::vector<std::vector<double>> cells(grid.size());
  std::size_t used = 0;
  for (const auto& p : pc.points) {
    const auto [r, c] = dsm.world_to_cell(p.x, p.y);
    if (!dsm.in_bounds(r, c)) continue;
    cells[dsm.index(r, c)].push_back(p.z);
    ++used;
  }
  std::size_t occupied = 0;
  for (const auto& c : cells) occupied += !c.empty();
  if (occupied == 0) throw InvalidArgument("no point falls inside the fusion grid");
  const std::size_t n = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(static_cast<double>(used) / static_cast<double>(occupied))));
  auto values = dsm.values();
  for (std::size_t k = 0; k < cells.size(); ++k) {
    auto& h = cells[k];
    if (h.empty()) continue;
    const std::size_t take = std::min(n, h.size());
    std::partial_sort(h.begin(), h.begin() + static_cast<std::ptrdiff_t>(take), h.end(), std::greater<>());
    h.resize(take);
    values[k] = median_inplace(h);
  }
  return dsm;
}

RasterGrid despike(const RasterGrid& dsm, const FusionConfig& cfg) {
  cfg.validate();
  RasterGrid out = dsm;
  const int half = cfg.despike_window / 2;
  parallel_for(static_cast<std::size_t>(dsm.rows()), 16, [&](std::size_t ra, std::size_t rb) {
    std::vector<double> win;
    for (int r = static_cast<int>(ra); r < static_cast<int>(rb); ++r) {
      for (int c = 0; c < dsm.cols(); ++c) {
        if (!dsm.valid(r, c)) continue;
        win.clear();
        for (int i = std::max(0, r - half); i <= std::min(dsm.rows() - 1, r + half); ++i)
          for (int j = std::max(0, c - half); j <= std::min(dsm.cols() - 1, c + half); ++j)
            if (dsm.valid(i, j)) win.push_back(dsm.at(i, j));
        const double med = median_inplace(win);
        if (std::abs(dsm.at(r, c) - med) > cfg.despike_threshold) out.at(r, c) = med;
      }
    }
  });
  return out;
}

RasterGrid fill_idw(const RasterGrid& dsm, const FusionConfig& cfg) {
  cfg.validate();
  const std::size_t valid_total = dsm.count_valid();
  if (valid_total == 0) throw InvalidArgument("IDW fill needs at least one valid cell");
  RasterGrid out = dsm;
  const int R = dsm.rows(), C = dsm.cols();
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(cfg.idw_max_neighbors), valid_total);
  const int max_ring = std::max(R, C);
  parallel_for(static_cast<std::size_t>(R), 8, [&](std::size_t ra, std::size_t rb) {
    struct Cand {
      double d2;
      std::size_t idx;
    };
    std::vector<Cand> cand;
    for (int r = static_cast<int>(ra); r < static_cast<int>(rb); ++r) {
      for (int c = 0; c < C; ++c) {
        if (dsm.valid(r, c)) continue;
        cand.clear();
        for (int ring = 1; ring <= max_ring; ++ring) {
          auto visit = [&](int i, int j) {
            if (i < 0 || j < 0 || i >= R || j >= C || !dsm.valid(i, j)) return;
            const double di = i - r, dj = j - c;
            cand.push_back({di * di + dj * dj, dsm.index(i, j)});
          };
          for (int j = c - ring; j <= c + ring; ++j) {
            visit(r - ring, j);
            visit(r + ring, j);
          }
          for (int i = r - ring + 1; i <= r + ring - 1; ++i) {
            visit(i, c - ring);
            visit(i, c + ring);
          }
          if (cand.size() < k) continue;
          std::nth_element(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k - 1), cand.end(),
                           [](const Cand& a, const Cand& b) { return a.d2 < b.d2 || (a.d2 == b.d2 && a.idx < b.idx); });
          // Cells in later rings are at least ring+1 away.
          if (cand[k - 1].d2 <= static_cast<double>(ring + 1) * (ring + 1) - 1e-9 || ring == max_ring) break;
        }
        if (cand.size() > k) cand.resize(k);
        double num = 0.0, den = 0.0;
        for (const auto& q : cand) {
          const double w = std::pow(std::sqrt(q.d2) * dsm.cell_size(), -cfg.idw_power);
          num += w * dsm.values()[q.idx];
          den += w;
        }
        out.at(r, c) = num / den;
      }
    }
  });
  return out;
}

RasterGrid conventional_dsm(const PointCloud& pc, const FusionConfig& cfg, const GridSpec& grid) {
  return fill_idw(despike(fuse_median(pc, cfg, grid), cfg), cfg);
}

}  // namespace implicity
