// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "implicity/common/rng.hpp"
#include "implicity/geometry/vec.hpp"
#include "implicity/scene/scene.hpp"

namespace implicity {

enum class SurfaceKind : std::uint8_t { Terrain, Roof, Facade, Uniform };

const char* to_string(SurfaceKind k);

/// Dense ground-truth samples of a scene.
struct LabeledPoints {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> occupancy;
  std::vector<SurfaceKind> kind;

  std::size_t size() const { return points.size(); }
};

struct GtSamplingConfig {
  double spacing_roof = 0.1;
  double spacing_other = 0.2;
  double spacing_uniform = 1.0;  // target mean nearest-neighbor distance
  std::uint64_t seed = 0;
};

/// Roof and terrain on regular xy lattices, facades on (along-wall, z) lattices, all
/// labeled occupied; plus uniform random volume points (density set so the expected
/// nearest-neighbor distance equals spacing_uniform) labeled by the oracle. Restricted
/// to `region` (defaults to the scene extent).
LabeledPoints sample_gt_surface(const SceneModel& scene, const GtSamplingConfig& cfg);
LabeledPoints sample_gt_surface(const SceneModel& scene, const GtSamplingConfig& cfg, const Rect& region);

/// Continuous area-weighted sampling of the true surface inside a rectangle. Surface
/// elements are terrain, roofs (weight multiplied by roof_weight), building walls and
/// dormer faces. Every returned point is occupied under the oracle.
class SurfaceSampler {
 public:
  SurfaceSampler(const SceneModel& scene, const Rect& region, double roof_weight = 2.0);

  struct Sample {
    Vec3 point;
    SurfaceKind kind;
  };
  Sample sample(Rng& rng) const;
  double total_weight() const { return total_; }

 private:
  struct Element {
    enum Type { Terrain, Roof, Wall, DormerFront, DormerSide } type;
    int building = -1;
    int sub = 0;  // wall edge index or dormer index (+ side for dormer sides)
    double weight = 0.0;
  };
  bool sample_element(const Element& e, Rng& rng, Sample& out) const;

  const SceneModel* scene_;
  Rect region_;
  std::vector<Element> elements_;
  std::vector<double> cumulative_;
  double total_ = 0.0;
};

}  // namespace implicity
