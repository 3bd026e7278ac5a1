// SPDX-License-Identifier: Apache-2.0
#include "implicity/scene/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "implicity/common/error.hpp"
#include "implicity/common/rng.hpp"

namespace implicity {

const char* to_string(RoofType r) {
  switch (r) {
    case RoofType::Flat: return "flat";
    case RoofType::Gable: return "gable";
    case RoofType::GableDormer: return "gable_dormer";
  }
  return "flat";
}

RoofType roof_type_from_string(const std::string& s) {
  if (s == "flat") return RoofType::Flat;
  if (s == "gable") return RoofType::Gable;
  if (s == "gable_dormer") return RoofType::GableDormer;
  throw FormatError("unknown roof type: " + s);
}

// ---------------------------------------------------------------------------------------
// Building

Vec2 Building::to_local(Vec2 p) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const Vec2 d = p - center;
  return {c * d.x + s * d.y, -s * d.x + c * d.y};
}

Vec2 Building::to_world(Vec2 l) const {
  const double c = std::cos(angle), s = std::sin(angle);
  return {center.x + c * l.x - s * l.y, center.y + s * l.x + c * l.y};
}

bool Building::contains(Vec2 p) const {
  const Vec2 l = to_local(p);
  return std::abs(l.x) <= half_length && std::abs(l.y) <= half_width;
}

double Building::roof_height(Vec2 p) const {
  if (roof == RoofType::Flat) return eave;
  const Vec2 l = to_local(p);
  const double av = std::min(std::abs(l.y), half_width);
  double z = eave + ridge_rise * (1.0 - av / half_width);
  for (const auto& d : dormers) {
    const bool on_side = d.side > 0 ? l.y >= 0.0 : l.y <= 0.0;
    if (on_side && l.x >= d.u0 && l.x <= d.u1 && av >= d.v_inner && av <= d.v_outer)
      z = std::max(z, d.top);
  }
  return z;
}

Vec3 Building::roof_normal(Vec2 p) const {
  if (roof == RoofType::Flat) return {0, 0, 1};
  const Vec2 l = to_local(p);
  const double av = std::abs(l.y);
  for (const auto& d : dormers) {
    const bool on_side = d.side > 0 ? l.y >= 0.0 : l.y <= 0.0;
    if (on_side && l.x >= d.u0 && l.x <= d.u1 && av >= d.v_inner && av <= d.v_outer) return {0, 0, 1};
  }
  const double dzdv = -ridge_rise / half_width * (l.y >= 0.0 ? 1.0 : -1.0);
  const Vec2 vdir{-std::sin(angle), std::cos(angle)};
  const double gx = dzdv * vdir.x, gy = dzdv * vdir.y;
  const double n = std::sqrt(gx * gx + gy * gy + 1.0);
  return {-gx / n, -gy / n, 1.0 / n};
}

std::vector<Vec2> Building::corners() const {
  return {to_world({-half_length, -half_width}), to_world({half_length, -half_width}),
          to_world({half_length, half_width}), to_world({-half_length, half_width})};
}

Rect Building::bbox() const {
  Rect r{1e300, 1e300, -1e300, -1e300};
  for (const auto& c : corners()) {
    r.x0 = std::min(r.x0, c.x);
    r.y0 = std::min(r.y0, c.y);
    r.x1 = std::max(r.x1, c.x);
    r.y1 = std::max(r.y1, c.y);
  }
  return r;
}

// ---------------------------------------------------------------------------------------
// Polygon / terrain

bool Polygon::contains(Vec2 p) const {
  bool inside = false;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Vec2 a = vertices[i], b = vertices[j];
    if ((a.y > p.y) != (b.y > p.y) && p.x < (b.x - a.x) * (p.y - a.y) / (b.y - a.y) + a.x)
      inside = !inside;
  }
  return inside;
}

Rect Polygon::bbox() const {
  Rect r{1e300, 1e300, -1e300, -1e300};
  for (const auto& v : vertices) {
    r.x0 = std::min(r.x0, v.x);
    r.y0 = std::min(r.y0, v.y);
    r.x1 = std::max(r.x1, v.x);
    r.y1 = std::max(r.y1, v.y);
  }
  return r;
}

double Terrain::height(double x, double y) const {
  double z = base;
  for (const auto& w : waves) z += w.amplitude * std::sin(w.kx * x + w.ky * y + w.phase);
  return z;
}

Vec2 Terrain::gradient(double x, double y) const {
  Vec2 g{0, 0};
  for (const auto& w : waves) {
    const double c = w.amplitude * std::cos(w.kx * x + w.ky * y + w.phase);
    g.x += c * w.kx;
    g.y += c * w.ky;
  }
  return g;
}

// ---------------------------------------------------------------------------------------
// Config

SceneConfig SceneConfig::from_kv(const KvConfig& kv, const SceneConfig& d) {
  SceneConfig c = d;
  c.width = kv.get_double("scene.width", d.width);
  c.height = kv.get_double("scene.height", d.height);
  c.building_density = kv.get_double("scene.building_density", d.building_density);
  c.min_length = kv.get_double("scene.min_length", d.min_length);
  c.max_length = kv.get_double("scene.max_length", d.max_length);
  c.min_width = kv.get_double("scene.min_width", d.min_width);
  c.max_width = kv.get_double("scene.max_width", d.max_width);
  c.min_eave = kv.get_double("scene.min_eave", d.min_eave);
  c.max_eave = kv.get_double("scene.max_eave", d.max_eave);
  c.gable_probability = kv.get_double("scene.gable_probability", d.gable_probability);
  c.dormer_probability = kv.get_double("scene.dormer_probability", d.dormer_probability);
  c.min_pitch_deg = kv.get_double("scene.min_pitch_deg", d.min_pitch_deg);
  c.max_pitch_deg = kv.get_double("scene.max_pitch_deg", d.max_pitch_deg);
  c.min_gap = kv.get_double("scene.min_gap", d.min_gap);
  c.terrain_relief = kv.get_double("scene.terrain_relief", d.terrain_relief);
  c.forest_regions = static_cast<int>(kv.get_int("scene.forest_regions", d.forest_regions));
  c.water_regions = static_cast<int>(kv.get_int("scene.water_regions", d.water_regions));
  c.region_radius = kv.get_double("scene.region_radius", d.region_radius);
  c.max_retries = static_cast<int>(kv.get_int("scene.max_retries", d.max_retries));
  return c;
}

KvConfig SceneConfig::to_kv() const {
  KvConfig kv;
  kv.set("scene.width", format_double(width));
  kv.set("scene.height", format_double(height));
  kv.set("scene.building_density", format_double(building_density));
  kv.set("scene.min_length", format_double(min_length));
  kv.set("scene.max_length", format_double(max_length));
  kv.set("scene.min_width", format_double(min_width));
  kv.set("scene.max_width", format_double(max_width));
  kv.set("scene.min_eave", format_double(min_eave));
  kv.set("scene.max_eave", format_double(max_eave));
  kv.set("scene.gable_probability", format_double(gable_probability));
  kv.set("scene.dormer_probability", format_double(dormer_probability));
  kv.set("scene.min_pitch_deg", format_double(min_pitch_deg));
  kv.set("scene.max_pitch_deg", format_double(max_pitch_deg));
  kv.set("scene.min_gap", format_double(min_gap));
  kv.set("scene.terrain_relief", format_double(terrain_relief));
  kv.set("scene.forest_regions", std::to_string(forest_regions));
  kv.set("scene.water_regions", std::to_string(water_regions));
  kv.set("scene.region_radius", format_double(region_radius));
  kv.set("scene.max_retries", std::to_string(max_retries));
  return kv;
}

// ---------------------------------------------------------------------------------------
// SceneModel

SceneModel::SceneModel(std::uint64_t seed, const SceneConfig& config, Rect extent, Terrain terrain,
                       std::vector<Building> buildings, std::vector<Polygon> forests,
                       std::vector<Polygon> waters)
    : seed_(seed),
      config_(config),
      extent_(extent),
      terrain_(std::move(terrain)),
      buildings_(std::move(buildings)),
      forests_(std::move(forests)),
      waters_(std::move(waters)) {
  z_min_ = 1e300;
  z_max_ = -1e300;
  const int nx = static_cast<int>(std::ceil(extent_.width())) + 1;
  const int ny = static_cast<int>(std::ceil(extent_.height())) + 1;
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) {
      const double x = std::min(extent_.x0 + j, extent_.x1), y = std::min(extent_.y0 + i, extent_.y1);
      const double t = terrain_.height(x, y);
      z_min_ = std::min(z_min_, t);
      z_max_ = std::max(z_max_, t);
    }
  }
  for (const auto& b : buildings_) {
    z_max_ = std::max(z_max_, b.ridge_height());
    for (const auto& d : b.dormers) z_max_ = std::max(z_max_, d.top);
  }
  build_index();
}

void SceneModel::build_index() {
  index_cols_ = std::max(1, static_cast<int>(std::ceil(extent_.width() / kIndexCell)));
  index_rows_ = std::max(1, static_cast<int>(std::ceil(extent_.height() / kIndexCell)));
  index_.assign(static_cast<std::size_t>(index_cols_) * index_rows_, {});
  for (std::size_t k = 0; k < buildings_.size(); ++k) {
    const Rect b = buildings_[k].bbox();
    const int c0 = std::clamp(static_cast<int>(std::floor((b.x0 - extent_.x0) / kIndexCell)), 0, index_cols_ - 1);
    const int c1 = std::clamp(static_cast<int>(std::floor((b.x1 - extent_.x0) / kIndexCell)), 0, index_cols_ - 1);
    const int r0 = std::clamp(static_cast<int>(std::floor((b.y0 - extent_.y0) / kIndexCell)), 0, index_rows_ - 1);
    const int r1 = std::clamp(static_cast<int>(std::floor((b.y1 - extent_.y0) / kIndexCell)), 0, index_rows_ - 1);
    for (int r = r0; r <= r1; ++r)
      for (int c = c0; c <= c1; ++c) index_[r * index_cols_ + c].push_back(static_cast<int>(k));
  }
}

int SceneModel::building_at(double x, double y) const {
  // Footprints lie strictly inside the extent, so clamping outside queries is safe.
  const int c = std::clamp(static_cast<int>(std::floor((x - extent_.x0) / kIndexCell)), 0, index_cols_ - 1);
  const int r = std::clamp(static_cast<int>(std::floor((y - extent_.y0) / kIndexCell)), 0, index_rows_ - 1);
  for (int k : index_[r * index_cols_ + c])
    if (buildings_[k].contains({x, y})) return k;
  return -1;
}

double SceneModel::surface(double x, double y) const {
  const int b = building_at(x, y);
  return b >= 0 ? buildings_[b].roof_height({x, y}) : terrain_.height(x, y);
}

Vec3 SceneModel::surface_normal(double x, double y) const {
  const int b = building_at(x, y);
  if (b >= 0) return buildings_[b].roof_normal({x, y});
  const Vec2 g = terrain_.gradient(x, y);
  const double n = std::sqrt(g.x * g.x + g.y * g.y + 1.0);
  return {-g.x / n, -g.y / n, 1.0 / n};
}

bool SceneModel::in_forest(double x, double y) const {
  return std::any_of(forests_.begin(), forests_.end(), [&](const Polygon& p) { return p.contains({x, y}); });
}

bool SceneModel::in_water(double x, double y) const {
  return std::any_of(waters_.begin(), waters_.end(), [&](const Polygon& p) { return p.contains({x, y}); });
}

bool SceneModel::in_volume(const Vec3& p) const {
  return extent_.contains(p.x, p.y) && p.z >= volume_floor() && p.z <= volume_ceiling();
}

std::vector<int> SceneModel::buildings_in(const Rect& r) const {
  std::vector<int> out;
  for (std::size_t k = 0; k < buildings_.size(); ++k)
    if (buildings_[k].bbox().intersects(r)) out.push_back(static_cast<int>(k));
  return out;
}

int occupancy_oracle(const SceneModel& scene, const Vec3& p) {
  if (!scene.in_volume(p)) throw InvalidArgument("occupancy query outside the scene volume");
  return p.z <= scene.surface(p.x, p.y) ? 1 : 0;
}

// ---------------------------------------------------------------------------------------
// Generation

namespace {

// Separating-axis test on footprints inflated by gap/2 each.
bool footprints_overlap(const Building& a, const Building& b, double gap) {
  const double ha[2] = {a.half_length + gap / 2, a.half_width + gap / 2};
  const double hb[2] = {b.half_length + gap / 2, b.half_width + gap / 2};
  const Vec2 ua{std::cos(a.angle), std::sin(a.angle)}, va{-ua.y, ua.x};
  const Vec2 ub{std::cos(b.angle), std::sin(b.angle)}, vb{-ub.y, ub.x};
  const Vec2 d = b.center - a.center;
  for (const Vec2 n : {ua, va, ub, vb}) {
    const double ra = ha[0] * std::abs(dot(ua, n)) + ha[1] * std::abs(dot(va, n));
    const double rb = hb[0] * std::abs(dot(ub, n)) + hb[1] * std::abs(dot(vb, n));
    if (std::abs(dot(d, n)) > ra + rb) return false;
  }
  return true;
}

Polygon make_region(Rng& rng, Vec2 c, double radius) {
  Polygon p;
  constexpr int kVerts = 10;
  for (int k = 0; k < kVerts; ++k) {
    const double a = 2.0 * std::numbers::pi * k / kVerts;
    const double r = radius * uniform(rng, 0.75, 1.0);
    p.vertices.push_back({c.x + r * std::cos(a), c.y + r * std::sin(a)});
  }
  return p;
}

void add_dormers(Rng& rng, Building& b) {
  const double hl = b.half_length, hw = b.half_width;
  for (int side : {1, -1}) {
    if (side < 0 && uniform(rng, 0, 1) < 0.5) continue;
    const int count = 1 + static_cast<int>(uniform(rng, 0, 3));
    const double span = 2.0 * (hl - 1.0);
    double cursor = -hl + 1.0;
    for (int k = 0; k < count; ++k) {
      const double len = uniform(rng, 1.5, 3.0);
      const double slack = (-hl + 1.0 + span) - cursor - len;
      if (slack < 0.0) break;
      const double start = cursor + uniform(rng, 0.0, std::min(slack, span / count));
      Dormer d;
      d.u0 = start;
      d.u1 = start + len;
      d.v_inner = hw * uniform(rng, 0.2, 0.35);
      d.v_outer = hw * uniform(rng, 0.65, 0.85);
      d.side = side;
      d.top = b.eave + b.ridge_rise * (1.0 - d.v_inner / hw);
      b.dormers.push_back(d);
      cursor = d.u1 + 1.0;
    }
  }
  if (b.dormers.empty()) b.roof = RoofType::Gable;
}

}  // namespace

SceneModel generate_scene(std::uint64_t seed, const SceneConfig& cfg) {
  if (!(cfg.width > 0 && cfg.height > 0)) throw InvalidArgument("scene extent must be positive");
  if (cfg.building_density < 0) throw InvalidArgument("building density must be non-negative");
  if (cfg.min_length < cfg.min_width || cfg.max_length < cfg.min_length || cfg.max_width < cfg.min_width)
    throw InvalidArgument("inconsistent building size ranges");
  Rng rng(mix_seed(seed));
  const Rect extent{0.0, 0.0, cfg.width, cfg.height};

  Terrain terrain;
  terrain.base = uniform(rng, 380.0, 460.0);
  constexpr int kWaves = 4;
  for (int k = 0; k < kWaves; ++k) {
    const double wavelength = uniform(rng, 90.0, 320.0);
    const double dir = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const double kmag = 2.0 * std::numbers::pi / wavelength;
    terrain.waves.push_back({cfg.terrain_relief / (2.0 * kWaves) * uniform(rng, 0.5, 1.5),
                             kmag * std::cos(dir), kmag * std::sin(dir),
                             uniform(rng, 0.0, 2.0 * std::numbers::pi)});
  }

  struct Disc {
    Vec2 c;
    double r;
  };
  std::vector<Disc> regions;
  auto place_regions = [&](int count, std::vector<Polygon>& out) {
    for (int k = 0; k < count; ++k) {
      const double r = cfg.region_radius * uniform(rng, 0.7, 1.3);
      if (2 * r >= std::min(cfg.width, cfg.height)) continue;
      for (int attempt = 0; attempt < cfg.max_retries; ++attempt) {
        const Vec2 c{uniform(rng, r, cfg.width - r), uniform(rng, r, cfg.height - r)};
        const bool clear = std::all_of(regions.begin(), regions.end(),
                                       [&](const Disc& d) { return norm(d.c - c) > d.r + r + 4.0; });
        if (!clear) continue;
        regions.push_back({c, r});
        out.push_back(make_region(rng, c, r));
        break;
      }
    }
  };
  std::vector<Polygon> forests, waters;
  place_regions(cfg.forest_regions, forests);
  place_regions(cfg.water_regions, waters);

  const int target = static_cast<int>(std::lround(cfg.building_density * cfg.width * cfg.height / 1e4));
  std::vector<Building> buildings;
  buildings.reserve(target);
  for (int n = 0; n < target; ++n) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      Building b;
      b.id = n;
      const double len = uniform(rng, cfg.min_length, cfg.max_length);
      const double wid = uniform(rng, cfg.min_width, std::min(cfg.max_width, len));
      b.half_length = len / 2;
      b.half_width = wid / 2;
      b.angle = uniform(rng, 0.0, std::numbers::pi);
      const double hd = std::hypot(b.half_length, b.half_width);
      const double margin = hd + 1.0;
      if (2 * margin >= cfg.width || 2 * margin >= cfg.height) continue;
      b.center = {uniform(rng, margin, cfg.width - margin), uniform(rng, margin, cfg.height - margin)};
      const bool clear_regions = std::all_of(regions.begin(), regions.end(), [&](const Disc& d) {
        return norm(d.c - b.center) > d.r + hd + cfg.min_gap;
      });
      if (!clear_regions) continue;
      const bool clear_buildings = std::none_of(buildings.begin(), buildings.end(), [&](const Building& o) {
        return footprints_overlap(b, o, cfg.min_gap);
      });
      if (!clear_buildings) continue;

      double ground_max = -1e300;
      for (int i = 0; i <= 4; ++i)
        for (int j = 0; j <= 4; ++j) {
          const Vec2 p = b.to_world({-b.half_length + i * b.half_length / 2, -b.half_width + j * b.half_width / 2});
          ground_max = std::max(ground_max, terrain.height(p.x, p.y));
        }
      const double pick = uniform(rng, 0.0, 1.0);
      if (pick < cfg.gable_probability) {
        b.roof = uniform(rng, 0.0, 1.0) < cfg.dormer_probability && b.half_length >= 3.5
                     ? RoofType::GableDormer
                     : RoofType::Gable;
        b.eave = ground_max + uniform(rng, cfg.min_eave, cfg.min_eave + 0.4 * (cfg.max_eave - cfg.min_eave));
        const double pitch = uniform(rng, cfg.min_pitch_deg, cfg.max_pitch_deg) * std::numbers::pi / 180.0;
        b.ridge_rise = b.half_width * std::tan(pitch);
        if (b.roof == RoofType::GableDormer) add_dormers(rng, b);
      } else {
        b.roof = RoofType::Flat;
        b.eave = ground_max + uniform(rng, cfg.min_eave, cfg.max_eave);
      }
      buildings.push_back(std::move(b));
      placed = true;
    }
    if (!placed)
      throw InvalidArgument("cannot place building " + std::to_string(n + 1) + " of " + std::to_string(target) +
                            " without overlap; lower scene.building_density");
  }
  return SceneModel(seed, cfg, extent, std::move(terrain), std::move(buildings), std::move(forests),
                    std::move(waters));
}

}  // namespace implicity
