// SPDX-License-Identifier: Apache-2.0
#include "implicity/sensor/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "implicity/common/error.hpp"
#include "implicity/common/rng.hpp"

namespace implicity {

void SensorConfig::validate() const {
  if (!(density > 0)) throw InvalidArgument("sensor density must be positive");
  if (noise_sigma_z < 0 || noise_sigma_xy < 0 || forest_extra_sigma < 0)
    throw InvalidArgument("noise sigmas must be non-negative");
  if (!(outlier_fraction >= 0 && outlier_fraction <= 1)) throw InvalidArgument("outlier_fraction must lie in [0,1]");
  if (xy_lattice < 0) throw InvalidArgument("xy_lattice must be non-negative");
  if (outlier_z_range < 0) throw InvalidArgument("outlier_z_range must be non-negative");
  if (edge_fattening < 0) throw InvalidArgument("edge_fattening must be non-negative");
  if (occlusion_pairs < 0) throw InvalidArgument("occlusion_pairs must be non-negative");
  if (!(occlusion_off_nadir_deg >= 0 && occlusion_off_nadir_deg < 80))
    throw InvalidArgument("occlusion_off_nadir_deg must lie in [0, 80)");
}

SensorConfig SensorConfig::from_kv(const KvConfig& kv, const SensorConfig& d) {
  SensorConfig c = d;
  c.density = kv.get_double("sensor.density", d.density);
  c.noise_sigma_z = kv.get_double("sensor.noise_sigma_z", d.noise_sigma_z);
  c.noise_sigma_xy = kv.get_double("sensor.noise_sigma_xy", d.noise_sigma_xy);
  c.outlier_fraction = kv.get_double("sensor.outlier_fraction", d.outlier_fraction);
  c.outlier_z_range = kv.get_double("sensor.outlier_z_range", d.outlier_z_range);
  c.forest_extra_sigma = kv.get_double("sensor.forest_extra_sigma", d.forest_extra_sigma);
  c.xy_lattice = kv.get_double("sensor.xy_lattice", d.xy_lattice);
  c.edge_fattening = kv.get_double("sensor.edge_fattening", d.edge_fattening);
  c.occlusion_pairs = static_cast<int>(kv.get_int("sensor.occlusion_pairs", d.occlusion_pairs));
  c.occlusion_off_nadir_deg = kv.get_double("sensor.occlusion_off_nadir_deg", d.occlusion_off_nadir_deg);
  c.occlusion_pair_spread_deg = kv.get_double("sensor.occlusion_pair_spread_deg", d.occlusion_pair_spread_deg);
  c.seed = static_cast<std::uint64_t>(kv.get_int("sensor.seed", static_cast<long long>(d.seed)));
  return c;
}

KvConfig SensorConfig::to_kv() const {
  KvConfig kv;
  kv.set("sensor.density", format_double(density));
  kv.set("sensor.noise_sigma_z", format_double(noise_sigma_z));
  kv.set("sensor.noise_sigma_xy", format_double(noise_sigma_xy));
  kv.set("sensor.outlier_fraction", format_double(outlier_fraction));
  kv.set("sensor.outlier_z_range", format_double(outlier_z_range));
  kv.set("sensor.forest_extra_sigma", format_double(forest_extra_sigma));
  kv.set("sensor.xy_lattice", format_double(xy_lattice));
  kv.set("sensor.edge_fattening", format_double(edge_fattening));
  kv.set("sensor.occlusion_pairs", std::to_string(occlusion_pairs));
  kv.set("sensor.occlusion_off_nadir_deg", format_double(occlusion_off_nadir_deg));
  kv.set("sensor.occlusion_pair_spread_deg", format_double(occlusion_pair_spread_deg));
  kv.set("sensor.seed", std::to_string(seed));
  return kv;
}

namespace {

// Marches from the surface point towards the sensor; blocked if the scene rises above
// the line of sight before it clears z_max.
bool visible(const SceneModel& scene, double x, double y, double z, double az_rad, double tan_off) {
  if (tan_off <= 0) return true;
  constexpr double kStep = 0.25;
  const double ux = std::sin(az_rad), uy = std::cos(az_rad);
  const Rect& e = scene.extent();
  for (double t = kStep;; t += kStep) {
    const double ray = z + t / tan_off;
    if (ray > scene.z_max()) return true;
    const double px = x + t * ux, py = y + t * uy;
    if (!e.contains(px, py)) return true;
    if (scene.surface(px, py) > ray + 1e-6) return false;
  }
}

// Max of the surface over two rings of radius r and r/2 around (x, y), clipped to the
// scene extent.
double fattened_surface(const SceneModel& scene, double x, double y, double r) {
  double z = scene.surface(x, y);
  if (r <= 0) return z;
  const Rect& e = scene.extent();
  for (int k = 0; k < 16; ++k) {
    const double a = k * std::numbers::pi / 8.0;
    for (const double rr : {r, 0.5 * r}) {
      if (rr == 0.5 * r && k % 2 == 1) continue;
      const double px = x + rr * std::cos(a), py = y + rr * std::sin(a);
      if (e.contains(px, py)) z = std::max(z, scene.surface(px, py));
    }
  }
  return z;
}

}  // namespace

PointCloud simulate_point_cloud(const SceneModel& scene, const SensorConfig& cfg) {
  cfg.validate();
  constexpr double kTile = 32.0;
  const Rect& e = scene.extent();
  const int tx = static_cast<int>(std::ceil(e.width() / kTile));
  const int ty = static_cast<int>(std::ceil(e.height() / kTile));
  const double tan_off = std::tan(cfg.occlusion_off_nadir_deg * std::numbers::pi / 180.0);
  PointCloud pc;
  for (int i = 0; i < ty; ++i) {
    for (int j = 0; j < tx; ++j) {
      const Rect t{e.x0 + j * kTile, e.y0 + i * kTile, std::min(e.x1, e.x0 + (j + 1) * kTile),
                   std::min(e.y1, e.y0 + (i + 1) * kTile)};
      Rng rng(sub_seed(cfg.seed, static_cast<std::uint64_t>(i) * 65536 + j));
      std::poisson_distribution<long long> count_dist(cfg.density * t.width() * t.height());
      const long long n = count_dist(rng);
      for (long long k = 0; k < n; ++k) {
        double x = uniform(rng, t.x0, t.x1), y = uniform(rng, t.y0, t.y1);
        if (cfg.xy_lattice > 0) {
          x = e.x0 + (std::floor((x - e.x0) / cfg.xy_lattice) + 0.5) * cfg.xy_lattice;
          y = e.y0 + (std::floor((y - e.y0) / cfg.xy_lattice) + 0.5) * cfg.xy_lattice;
        }
        const double surface = scene.surface(x, y);
        if (cfg.occlusion_pairs > 0) {
          // Each point comes from one stereo pair and must be seen by both of its views.
          const int pair = static_cast<int>(uniform(rng, 0.0, 1.0) * cfg.occlusion_pairs);
          const double az = (45.0 + 360.0 * std::min(pair, cfg.occlusion_pairs - 1) / cfg.occlusion_pairs) *
                            std::numbers::pi / 180.0;
          const double half = 0.5 * cfg.occlusion_pair_spread_deg * std::numbers::pi / 180.0;
          if (!visible(scene, x, y, surface, az - half, tan_off) || !visible(scene, x, y, surface, az + half, tan_off))
            continue;
        }
        double sigma_z = cfg.noise_sigma_z;
        if (scene.in_forest(x, y) && scene.building_at(x, y) < 0)
          sigma_z = std::hypot(sigma_z, cfg.forest_extra_sigma);
        const double measured = fattened_surface(scene, x, y, cfg.edge_fattening);
        Vec3 p{x + gaussian(rng, cfg.noise_sigma_xy), y + gaussian(rng, cfg.noise_sigma_xy),
               measured + gaussian(rng, sigma_z)};
        if (cfg.outlier_fraction > 0 && uniform(rng, 0.0, 1.0) < cfg.outlier_fraction)
          p.z = measured + uniform(rng, -cfg.outlier_z_range, cfg.outlier_z_range);
        pc.points.push_back(p);
      }
    }
  }
  if (pc.empty()) throw InvalidArgument("sensor density too low: simulated point cloud is empty");
  return pc;
}

}  // namespace implicity
