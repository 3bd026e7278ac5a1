// SPDX-License-Identifier: Apache-2.0
#include "implicity/sampler/queries.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

#include "implicity/common/error.hpp"
#include "implicity/common/rng.hpp"
#include "implicity/scene/surface_sampling.hpp"

namespace implicity {

const char* to_string(QueryTag t) { return t == QueryTag::Uniform ? "uniform" : "surface"; }

void QuerySet::append(const QuerySet& o) {
  points.insert(points.end(), o.points.begin(), o.points.end());
  occupancy.insert(occupancy.end(), o.occupancy.begin(), o.occupancy.end());
  weight.insert(weight.end(), o.weight.begin(), o.weight.end());
  tag.insert(tag.end(), o.tag.begin(), o.tag.end());
}

void SamplerConfig::validate() const {
  if (!(sigma >= 0)) throw InvalidArgument("sampler sigma must be non-negative");
  if (!(roof_weight > 0)) throw InvalidArgument("sampler roof_weight must be positive");
  if (!(z_margin >= 0) || z_margin >= 20.0) throw InvalidArgument("sampler z_margin must lie in [0, 20)");
  if (!(masked_weight > 0 && masked_weight <= 1)) throw InvalidArgument("sampler masked_weight must lie in (0, 1]");
}

SamplerConfig SamplerConfig::from_kv(const KvConfig& kv, const SamplerConfig& d) {
  SamplerConfig c = d;
  c.sigma = kv.get_double("sampler.sigma", d.sigma);
  c.roof_weight = kv.get_double("sampler.roof_weight", d.roof_weight);
  c.z_margin = kv.get_double("sampler.z_margin", d.z_margin);
  c.masked_weight = kv.get_double("sampler.masked_weight", d.masked_weight);
  return c;
}

KvConfig SamplerConfig::to_kv() const {
  KvConfig kv;
  kv.set("sampler.sigma", format_double(sigma));
  kv.set("sampler.roof_weight", format_double(roof_weight));
  kv.set("sampler.z_margin", format_double(z_margin));
  kv.set("sampler.masked_weight", format_double(masked_weight));
  return kv;
}

double query_weight(const SceneModel& scene, double x, double y, const SamplerConfig& cfg) {
  return scene.in_forest(x, y) || scene.in_water(x, y) ? cfg.masked_weight : 1.0;
}

QuerySet sample_training_queries(const SceneModel& scene, const PatchWindow& window, std::size_t total,
                                 const SamplerConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  if (total < 5) throw InvalidArgument("sample_training_queries needs total >= 5");
  const Rect w = window.extent();
  if (!scene.extent().contains(w)) throw InvalidArgument("query window lies outside the scene");

  const std::size_t n_uniform = total / 5;
  QuerySet q;
  q.points.reserve(total);
  Rng rng(sub_seed(seed, 1));
  const double z0 = scene.z_min() - cfg.z_margin, z1 = scene.z_max() + cfg.z_margin;
  for (std::size_t i = 0; i < n_uniform; ++i) {
    const double x = uniform(rng, w.x0, w.x1);
    const double y = uniform(rng, w.y0, w.y1);
    q.points.push_back({x, y, uniform(rng, z0, z1)});
    q.tag.push_back(QueryTag::Uniform);
  }

  const SurfaceSampler surf(scene, w, cfg.roof_weight);
  Rng srng(sub_seed(seed, 2));
  const Rect& e = scene.extent();
  for (std::size_t i = n_uniform; i < total; ++i) {
    const Vec3 s = surf.sample(srng).point;
    Vec3 p;
    do {
      p = {s.x + gaussian(srng, cfg.sigma), s.y + gaussian(srng, cfg.sigma), s.z + gaussian(srng, cfg.sigma)};
    } while (!e.contains(p.x, p.y));
    q.points.push_back(p);
    q.tag.push_back(QueryTag::Surface);
  }

  q.occupancy.resize(total);
  q.weight.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    const Vec3& p = q.points[i];
    q.occupancy[i] = static_cast<std::uint8_t>(occupancy_oracle(scene, p));
    q.weight[i] = query_weight(scene, p.x, p.y, cfg);
  }
  return q;
}

void write_query_csv(const QuerySet& q, std::ostream& out) {
  out << "x,y,z,o,w,tag\n";
  char buf[160];
  for (std::size_t i = 0; i < q.size(); ++i) {
    const Vec3& p = q.points[i];
    std::snprintf(buf, sizeof buf, "%.10g,%.10g,%.10g,%d,%.6g,%s\n", p.x, p.y, p.z, int(q.occupancy[i]), q.weight[i],
                  to_string(q.tag[i]));
    out << buf;
  }
}

void write_query_csv(const QuerySet& q, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path.string() + " for writing");
  write_query_csv(q, f);
  if (!f) throw Error("failed writing " + path.string());
}

}  // namespace implicity
