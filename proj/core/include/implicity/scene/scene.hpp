// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "implicity/common/kv_config.hpp"
#include "implicity/geometry/vec.hpp"

namespace implicity {

enum class RoofType { Flat, Gable, GableDormer };

const char* to_string(RoofType r);
RoofType roof_type_from_string(const std::string& s);

/// Flat-topped box dormer on one slope of a gable roof, in the building's local frame.
/// It spans u in [u0,u1] and |v| in [v_inner, v_outer] on side `side` (+1 or -1); its top
/// lies at the roof height of the inner edge so it emerges from the slope.
struct Dormer {
  double u0 = 0.0;
  double u1 = 0.0;
  double v_inner = 0.0;
  double v_outer = 0.0;
  int side = 1;
  double top = 0.0;
};

/// Oriented rectangular prism with a roof. Local frame: u along `angle` (ridge direction),
/// v perpendicular; footprint is |u| <= half_length, |v| <= half_width.
struct Building {
  int id = 0;
  Vec2 center;
  double angle = 0.0;
  double half_length = 0.0;
  double half_width = 0.0;
  double eave = 0.0;  // absolute eave height, meters
  RoofType roof = RoofType::Flat;
  double ridge_rise = 0.0;
  std::vector<Dormer> dormers;

  Vec2 to_local(Vec2 p) const;
  Vec2 to_world(Vec2 local) const;
  bool contains(Vec2 p) const;
  /// Roof envelope height at p (p assumed inside the footprint).
  double roof_height(Vec2 p) const;
  /// Upward unit normal of the roof at p (p inside the footprint).
  Vec3 roof_normal(Vec2 p) const;
  Rect bbox() const;
  std::vector<Vec2> corners() const;
  double footprint_area() const { return 4.0 * half_length * half_width; }
  double ridge_height() const { return eave + (roof == RoofType::Flat ? 0.0 : ridge_rise); }
};

/// Simple polygon (vertices in order), used for forest and water regions.
struct Polygon {
  std::vector<Vec2> vertices;
  bool contains(Vec2 p) const;
  Rect bbox() const;
};

/// Smooth terrain: base + sum of plane sinusoids.
struct Terrain {
  struct Wave {
    double amplitude = 0.0;
    double kx = 0.0;  // radians per meter
    double ky = 0.0;
    double phase = 0.0;
  };
  double base = 0.0;
  std::vector<Wave> waves;

  double height(double x, double y) const;
  Vec2 gradient(double x, double y) const;
};

struct SceneConfig {
  double width = 256.0;
  double height = 256.0;
  double building_density = 6.1;  // buildings per hectare
  double min_length = 8.0;
  double max_length = 30.0;
  double min_width = 7.0;
  double max_width = 16.0;
  double min_eave = 4.0;   // above ground
  double max_eave = 22.0;
  double gable_probability = 0.6;
  double dormer_probability = 0.5;  // among gable roofs
  double min_pitch_deg = 25.0;
  double max_pitch_deg = 42.0;
  double min_gap = 2.0;
  double terrain_relief = 6.0;
  int forest_regions = 2;
  int water_regions = 1;
  double region_radius = 18.0;
  int max_retries = 2000;

  static SceneConfig from_kv(const KvConfig& kv) { return from_kv(kv, SceneConfig()); }
  static SceneConfig from_kv(const KvConfig& kv, const SceneConfig& defaults);
  KvConfig to_kv() const;
};

/// Analytic ground-truth city. Occupancy is 2.5D: a point is occupied iff it lies at or
/// below surface(x, y) = roof envelope inside footprints, terrain elsewhere.
class SceneModel {
 public:
  SceneModel() = default;
  SceneModel(std::uint64_t seed, const SceneConfig& config, Rect extent, Terrain terrain,
             std::vector<Building> buildings, std::vector<Polygon> forests,
             std::vector<Polygon> waters);

  std::uint64_t seed() const { return seed_; }
  const SceneConfig& config() const { return config_; }
  const Rect& extent() const { return extent_; }
  const Terrain& terrain() const { return terrain_; }
  const std::vector<Building>& buildings() const { return buildings_; }
  const std::vector<Polygon>& forests() const { return forests_; }
  const std::vector<Polygon>& waters() const { return waters_; }

  /// Index into buildings() of the footprint containing (x, y), or -1.
  int building_at(double x, double y) const;
  double surface(double x, double y) const;
  Vec3 surface_normal(double x, double y) const;
  bool in_forest(double x, double y) const;
  bool in_water(double x, double y) const;

  /// Lowest terrain / highest surface over the extent (dense 1 m scan plus roof apexes).
  double z_min() const { return z_min_; }
  double z_max() const { return z_max_; }
  /// Vertical bounds of the scene volume: 20 m margin below z_min and above z_max.
  double volume_floor() const { return z_min_ - 20.0; }
  double volume_ceiling() const { return z_max_ + 20.0; }
  bool in_volume(const Vec3& p) const;

  /// Indices of buildings whose bounding box intersects r.
  std::vector<int> buildings_in(const Rect& r) const;

 private:
  void build_index();

  std::uint64_t seed_ = 0;
  SceneConfig config_{};
  Rect extent_{};
  Terrain terrain_{};
  std::vector<Building> buildings_;
  std::vector<Polygon> forests_;
  std::vector<Polygon> waters_;
  double z_min_ = 0.0;
  double z_max_ = 0.0;

  static constexpr double kIndexCell = 16.0;
  int index_cols_ = 0;
  int index_rows_ = 0;
  std::vector<std::vector<int>> index_;
};

/// Deterministic for fixed (seed, config). Throws InvalidArgument when buildings cannot
/// be placed without overlap within config.max_retries attempts each.
SceneModel generate_scene(std::uint64_t seed, const SceneConfig& config);

/// 1 iff p.z <= surface(p.x, p.y). Throws InvalidArgument outside the scene volume.
int occupancy_oracle(const SceneModel& scene, const Vec3& p);

/// Versioned key=value text document; round-trips exactly.
std::string serialize_scene(const SceneModel& scene);
SceneModel parse_scene(const std::string& text);
void save_scene(const SceneModel& scene, const std::string& path);
SceneModel load_scene(const std::string& path);

}  // namespace implicity
