// SPDX-License-Identifier: Apache-2.0
#include "implicity/scene/render.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "implicity/common/error.hpp"
#include "implicity/common/parallel.hpp"
#include "implicity/common/rng.hpp"

namespace implicity {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

double building_albedo(std::uint64_t scene_seed, int id) {
  const std::uint64_t h = sub_seed(scene_seed, 0xA1BED0ULL + static_cast<std::uint64_t>(id));
  return 0.35 + 0.5 * static_cast<double>(h >> 11) / static_cast<double>(1ULL << 53);
}

double surface_albedo(const SceneModel& scene, double x, double y) {
  const int b = scene.building_at(x, y);
  if (b >= 0) return building_albedo(scene.seed(), scene.buildings()[b].id);
  if (scene.in_water(x, y)) return 0.12;
  if (scene.in_forest(x, y)) return 0.25;
  return 0.45;
}

double sample_clamped(const RasterGrid& g, double x, double y) {
  const double u = std::clamp((x - g.spec().x0) / g.cell_size() - 0.5, 0.0, g.cols() - 1.0);
  const double v = std::clamp((y - g.spec().y0) / g.cell_size() - 0.5, 0.0, g.rows() - 1.0);
  const int c0 = std::min(static_cast<int>(u), std::max(g.cols() - 2, 0));
  const int r0 = std::min(static_cast<int>(v), std::max(g.rows() - 2, 0));
  const int c1 = std::min(c0 + 1, g.cols() - 1), r1 = std::min(r0 + 1, g.rows() - 1);
  const double fx = u - c0, fy = v - r0;
  return (1 - fx) * (1 - fy) * g.at(r0, c0) + fx * (1 - fy) * g.at(r0, c1) + (1 - fx) * fy * g.at(r1, c0) +
         fx * fy * g.at(r1, c1);
}

// Standard normal deviate keyed on the world cell, so the noise field does not depend on
// the render padding.
double cell_noise(std::uint64_t seed, Vec2 p, double cell) {
  const auto ix = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(p.x / cell)));
  const auto iy = static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(p.y / cell)));
  const std::uint64_t h1 = sub_seed(seed, ix * 0x9E3779B97F4A7C15ULL ^ iy);
  const std::uint64_t h2 = mix_seed(h1);
  const double u1 = (static_cast<double>(h1 >> 11) + 0.5) / static_cast<double>(1ULL << 53);
  const double u2 = static_cast<double>(h2 >> 11) / static_cast<double>(1ULL << 53);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

double error_at(const RasterGrid* e, double x, double y) {
  if (e == nullptr) return 0.0;
  const auto [r, c] = e->world_to_cell(x, y);
  if (!e->in_bounds(r, c) || !e->valid(r, c)) return 0.0;
  return e->at(r, c);
}

}  // namespace

ReferenceProducts render_reference_dsm(const SceneModel& scene, const GridSpec& grid) {
  ReferenceProducts out{RasterGrid(grid), RasterGrid(grid), RasterGrid(grid), RasterGrid(grid), RasterGrid(grid)};
  parallel_for(static_cast<std::size_t>(grid.rows), 8, [&](std::size_t r0, std::size_t r1) {
    for (int r = static_cast<int>(r0); r < static_cast<int>(r1); ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        const Vec2 p = out.dsm.cell_center(r, c);
        const int b = scene.building_at(p.x, p.y);
        out.dsm.at(r, c) = b >= 0 ? scene.buildings()[b].roof_height(p) : scene.terrain().height(p.x, p.y);
        out.building_mask.at(r, c) = b >= 0 ? 1.0 : 0.0;
        out.terrain_mask.at(r, c) = b >= 0 ? 0.0 : 1.0;
        out.forest_mask.at(r, c) = (b < 0 && scene.in_forest(p.x, p.y)) ? 1.0 : 0.0;
        out.water_mask.at(r, c) = (b < 0 && scene.in_water(p.x, p.y)) ? 1.0 : 0.0;
      }
    }
  });
  return out;
}

OrthoPair render_ortho_pair(const SceneModel& scene, const GridSpec& grid, const OrthoConfig& cfg,
                            const RasterGrid* rect_error) {
  if (!(cfg.sun_elevation_deg > 0.0 && cfg.sun_elevation_deg <= 90.0))
    throw InvalidArgument("sun elevation must lie in (0, 90] degrees");
  for (const auto& v : cfg.views)
    if (!(v.off_nadir_deg >= 0.0 && v.off_nadir_deg < 60.0))
      throw InvalidArgument("off-nadir angle must lie in [0, 60) degrees");

  double max_err = 0.0;
  if (rect_error != nullptr) {
    for (double v : rect_error->values())
      if (v != rect_error->nodata()) {
        if (!std::isfinite(v)) throw InvalidArgument("rectification error field must be finite");
        max_err = std::max(max_err, std::abs(v));
      }
  }
  double max_tan = 0.0;
  for (const auto& v : cfg.views) max_tan = std::max(max_tan, std::tan(v.off_nadir_deg * kDeg));
  const double max_warp = max_err * max_tan;
  const int pad = std::min(256, static_cast<int>(std::ceil(max_warp / grid.cell_size)) + 2);

  GridSpec padded = grid;
  padded.x0 -= pad * grid.cell_size;
  padded.y0 -= pad * grid.cell_size;
  padded.rows += 2 * pad;
  padded.cols += 2 * pad;

  const double sa = cfg.sun_azimuth_deg * kDeg, se = cfg.sun_elevation_deg * kDeg;
  const Vec3 sun{std::sin(sa) * std::cos(se), std::cos(sa) * std::cos(se), std::sin(se)};
  RasterGrid base(padded);
  parallel_for(static_cast<std::size_t>(padded.rows), 8, [&](std::size_t r0, std::size_t r1) {
    for (int r = static_cast<int>(r0); r < static_cast<int>(r1); ++r) {
      for (int c = 0; c < padded.cols; ++c) {
        const Vec2 p = base.cell_center(r, c);
        const Vec3 n = scene.surface_normal(p.x, p.y);
        const double lambert = std::max(0.0, n.x * sun.x + n.y * sun.y + n.z * sun.z);
        const double shade = cfg.ambient + (1.0 - cfg.ambient) * lambert;
        base.at(r, c) = surface_albedo(scene, p.x, p.y) * shade + cfg.noise_sigma * cell_noise(cfg.seed, p, grid.cell_size);
      }
    }
  });

  OrthoPair out;
  out.max_warp = max_warp;
  for (int k = 0; k < 2; ++k) {
    const auto& v = cfg.views[k];
    const double t = std::tan(v.off_nadir_deg * kDeg);
    const double az = v.azimuth_deg * kDeg;
    const Vec2 toward{std::sin(az), std::cos(az)};
    RasterGrid img(grid);
    for (int r = 0; r < grid.rows; ++r) {
      for (int c = 0; c < grid.cols; ++c) {
        const Vec2 p = img.cell_center(r, c);
        const double shift = error_at(rect_error, p.x, p.y) * t;
        const double value = sample_clamped(base, p.x - shift * toward.x, p.y - shift * toward.y);
        img.at(r, c) = std::clamp(v.gain * value + v.bias, 0.0, 1.0);
      }
    }
    out.views[k] = std::move(img);
    out.gain[k] = v.gain;
    out.bias[k] = v.bias;
  }
  return out;
}

}  // namespace implicity
