// SPDX-License-Identifier: Apache-2.0
#include "implicity/scene/surface_sampling.hpp"

#include <algorithm>
#include <cmath>

#include "implicity/common/error.hpp"

namespace implicity {
namespace {

constexpr double kInset = 1e-6;  // keeps wall samples on the occupied side of the wall

// Mean nearest-neighbour distance of a 3D Poisson process is Gamma(4/3) * (4 pi rho / 3)^(-1/3).
constexpr double kPoissonNnFactor = 0.5539602;

int lattice_count(double length, double spacing) {
  return std::max(1, static_cast<int>(std::lround(length / spacing)));
}

double gable_height(const Building& b, double av) {
  return b.eave + b.ridge_rise * (1.0 - std::min(av, b.half_width) / b.half_width);
}

struct WallEdge {
  Vec2 a, b;        // local endpoints
  Vec2 inward;      // local unit normal pointing into the footprint
};

WallEdge wall_edge(const Building& b, int k) {
  const double hl = b.half_length, hw = b.half_width;
  switch (k) {
    case 0: return {{-hl, -hw}, {hl, -hw}, {0, 1}};
    case 1: return {{hl, -hw}, {hl, hw}, {-1, 0}};
    case 2: return {{hl, hw}, {-hl, hw}, {0, -1}};
    default: return {{-hl, hw}, {-hl, -hw}, {1, 0}};
  }
}

}  // namespace

const char* to_string(SurfaceKind k) {
  switch (k) {
    case SurfaceKind::Terrain: return "terrain";
    case SurfaceKind::Roof: return "roof";
    case SurfaceKind::Facade: return "facade";
    case SurfaceKind::Uniform: return "uniform";
  }
  return "terrain";
}

LabeledPoints sample_gt_surface(const SceneModel& scene, const GtSamplingConfig& cfg) {
  return sample_gt_surface(scene, cfg, scene.extent());
}

LabeledPoints sample_gt_surface(const SceneModel& scene, const GtSamplingConfig& cfg, const Rect& region) {
  if (!(cfg.spacing_roof > 0 && cfg.spacing_other > 0 && cfg.spacing_uniform > 0))
    throw InvalidArgument("sampling spacings must be positive");
  LabeledPoints out;
  auto push = [&](Vec3 p, std::uint8_t occ, SurfaceKind k) {
    out.points.push_back(p);
    out.occupancy.push_back(occ);
    out.kind.push_back(k);
  };

  const auto in_region = scene.buildings_in(region);
  for (int bi : in_region) {
    const Building& b = scene.buildings()[bi];
    const int nu = lattice_count(2 * b.half_length, cfg.spacing_roof);
    const int nv = lattice_count(2 * b.half_width, cfg.spacing_roof);
    const double du = 2 * b.half_length / nu, dv = 2 * b.half_width / nv;
    for (int i = 0; i < nu; ++i) {
      for (int j = 0; j < nv; ++j) {
        const Vec2 p = b.to_world({-b.half_length + (i + 0.5) * du, -b.half_width + (j + 0.5) * dv});
        if (region.contains(p.x, p.y)) push({p.x, p.y, b.roof_height(p)}, 1, SurfaceKind::Roof);
      }
    }
    for (int k = 0; k < 4; ++k) {
      const WallEdge e = wall_edge(b, k);
      const double len = norm(e.b - e.a);
      const int n = lattice_count(len, cfg.spacing_other);
      for (int i = 0; i < n; ++i) {
        const double t = (i + 0.5) / n;
        const Vec2 local = e.a + t * (e.b - e.a) + kInset * e.inward;
        const Vec2 p = b.to_world(local);
        if (!region.contains(p.x, p.y)) continue;
        const double ground = scene.terrain().height(p.x, p.y), top = b.roof_height(p);
        for (double z = ground + 0.5 * cfg.spacing_other; z <= top; z += cfg.spacing_other)
          push({p.x, p.y, z}, 1, SurfaceKind::Facade);
      }
    }
  }

  const int nx = lattice_count(region.width(), cfg.spacing_other);
  const int ny = lattice_count(region.height(), cfg.spacing_other);
  const double dx = region.width() / nx, dy = region.height() / ny;
  for (int i = 0; i < ny; ++i) {
    for (int j = 0; j < nx; ++j) {
      const double x = region.x0 + (j + 0.5) * dx, y = region.y0 + (i + 0.5) * dy;
      if (scene.building_at(x, y) >= 0) continue;
      push({x, y, scene.terrain().height(x, y)}, 1, SurfaceKind::Terrain);
    }
  }

  const double z0 = scene.z_min() - 5.0, z1 = scene.z_max() + 5.0;
  const double rho = std::pow(kPoissonNnFactor / cfg.spacing_uniform, 3.0);
  const auto count = static_cast<std::size_t>(std::llround(rho * region.width() * region.height() * (z1 - z0)));
  Rng rng(sub_seed(cfg.seed, 0x6715ULL));
  for (std::size_t k = 0; k < count; ++k) {
    const Vec3 p{uniform(rng, region.x0, region.x1), uniform(rng, region.y0, region.y1), uniform(rng, z0, z1)};
    push(p, static_cast<std::uint8_t>(occupancy_oracle(scene, p)), SurfaceKind::Uniform);
  }
  return out;
}

// ---------------------------------------------------------------------------------------

SurfaceSampler::SurfaceSampler(const SceneModel& scene, const Rect& region, double roof_weight)
    : scene_(&scene), region_(region) {
  if (!(region.width() > 0 && region.height() > 0)) throw InvalidArgument("empty sampling region");
  constexpr int kProbe = 64;
  int free_cells = 0;
  for (int i = 0; i < kProbe; ++i)
    for (int j = 0; j < kProbe; ++j) {
      const double x = region.x0 + (j + 0.5) * region.width() / kProbe;
      const double y = region.y0 + (i + 0.5) * region.height() / kProbe;
      free_cells += scene.building_at(x, y) < 0;
    }
  const double area = region.width() * region.height();
  elements_.push_back({Element::Terrain, -1, 0, area * free_cells / (kProbe * kProbe)});

  for (int bi : scene.buildings_in(region)) {
    const Building& b = scene.buildings()[bi];
    constexpr int kFoot = 16;
    int inside = 0;
    for (int i = 0; i < kFoot; ++i)
      for (int j = 0; j < kFoot; ++j) {
        const Vec2 p = b.to_world({-b.half_length + (i + 0.5) * 2 * b.half_length / kFoot,
                                   -b.half_width + (j + 0.5) * 2 * b.half_width / kFoot});
        inside += region.contains(p.x, p.y);
      }
    if (inside == 0) continue;
    const double slope = b.roof == RoofType::Flat
                             ? 1.0
                             : std::hypot(b.half_width, b.ridge_rise) / b.half_width;
    elements_.push_back({Element::Roof, bi, 0,
                         roof_weight * b.footprint_area() * slope * inside / (kFoot * kFoot)});

    for (int k = 0; k < 4; ++k) {
      const WallEdge e = wall_edge(b, k);
      constexpr int kEdge = 9;
      double acc = 0.0;
      for (int i = 0; i < kEdge; ++i) {
        const Vec2 p = b.to_world(e.a + ((i + 0.5) / kEdge) * (e.b - e.a) + kInset * e.inward);
        if (region.contains(p.x, p.y)) acc += b.roof_height(p) - scene.terrain().height(p.x, p.y);
      }
      if (acc > 0) elements_.push_back({Element::Wall, bi, k, norm(e.b - e.a) * acc / kEdge});
    }
    for (std::size_t di = 0; di < b.dormers.size(); ++di) {
      const Dormer& d = b.dormers[di];
      const Vec2 mid = b.to_world({0.5 * (d.u0 + d.u1), d.side * 0.5 * (d.v_inner + d.v_outer)});
      if (!region.contains(mid.x, mid.y)) continue;
      const double front_h = d.top - gable_height(b, d.v_outer);
      const double side_h = d.top - gable_height(b, 0.5 * (d.v_inner + d.v_outer));
      const int sub = static_cast<int>(di);
      elements_.push_back({Element::DormerFront, bi, sub, (d.u1 - d.u0) * front_h});
      elements_.push_back({Element::DormerSide, bi, 2 * sub, (d.v_outer - d.v_inner) * side_h});
      elements_.push_back({Element::DormerSide, bi, 2 * sub + 1, (d.v_outer - d.v_inner) * side_h});
    }
  }

  for (const auto& e : elements_) {
    total_ += e.weight;
    cumulative_.push_back(total_);
  }
  if (!(total_ > 0)) throw InvalidArgument("sampling region contains no surface");
}

bool SurfaceSampler::sample_element(const Element& e, Rng& rng, Sample& out) const {
  const SceneModel& scene = *scene_;
  switch (e.type) {
    case Element::Terrain: {
      const double x = uniform(rng, region_.x0, region_.x1), y = uniform(rng, region_.y0, region_.y1);
      if (scene.building_at(x, y) >= 0) return false;
      out = {{x, y, scene.terrain().height(x, y)}, SurfaceKind::Terrain};
      return true;
    }
    case Element::Roof: {
      const Building& b = scene.buildings()[e.building];
      const Vec2 p = b.to_world({uniform(rng, -b.half_length, b.half_length), uniform(rng, -b.half_width, b.half_width)});
      if (!region_.contains(p.x, p.y) || !b.contains(p)) return false;
      out = {{p.x, p.y, b.roof_height(p)}, SurfaceKind::Roof};
      return true;
    }
    case Element::Wall: {
      const Building& b = scene.buildings()[e.building];
      const WallEdge w = wall_edge(b, e.sub);
      const Vec2 p = b.to_world(w.a + uniform(rng, 0.0, 1.0) * (w.b - w.a) + kInset * w.inward);
      if (!region_.contains(p.x, p.y) || !b.contains(p)) return false;
      out = {{p.x, p.y, uniform(rng, scene.terrain().height(p.x, p.y), b.roof_height(p))}, SurfaceKind::Facade};
      return true;
    }
    case Element::DormerFront: {
      const Building& b = scene.buildings()[e.building];
      const Dormer& d = b.dormers[e.sub];
      const Vec2 p = b.to_world({uniform(rng, d.u0, d.u1), d.side * (d.v_outer - kInset)});
      if (!region_.contains(p.x, p.y) || !b.contains(p)) return false;
      out = {{p.x, p.y, uniform(rng, gable_height(b, d.v_outer), d.top)}, SurfaceKind::Facade};
      return true;
    }
    case Element::DormerSide: {
      const Building& b = scene.buildings()[e.building];
      const Dormer& d = b.dormers[e.sub / 2];
      const double u = (e.sub % 2 == 0) ? d.u0 + kInset : d.u1 - kInset;
      const double av = uniform(rng, d.v_inner, d.v_outer);
      const Vec2 p = b.to_world({u, d.side * av});
      if (!region_.contains(p.x, p.y) || !b.contains(p)) return false;
      out = {{p.x, p.y, uniform(rng, gable_height(b, av), d.top)}, SurfaceKind::Facade};
      return true;
    }
  }
  return false;
}

SurfaceSampler::Sample SurfaceSampler::sample(Rng& rng) const {
  for (int attempt = 0; attempt < 100000; ++attempt) {
    const double t = uniform(rng, 0.0, total_);
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), t);
    const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - cumulative_.begin()), elements_.size() - 1);
    Sample s;
    if (sample_element(elements_[k], rng, s)) return s;
  }
  throw NumericError("surface sampling failed to find a point inside the region");
}

}  // namespace implicity
