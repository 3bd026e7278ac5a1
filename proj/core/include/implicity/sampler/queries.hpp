// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "implicity/common/kv_config.hpp"
#include "implicity/geometry/patch_window.hpp"
#include "implicity/scene/scene.hpp"

namespace implicity {

enum class QueryTag : std::uint8_t { Uniform, Surface };

const char* to_string(QueryTag t);

/// Training queries in world coordinates with oracle labels and loss weights.
struct QuerySet {
  std::vector<Vec3> points;
  std::vector<std::uint8_t> occupancy;
  std::vector<double> weight;
  std::vector<QueryTag> tag;

  std::size_t size() const { return points.size(); }
  void append(const QuerySet& other);
};

struct SamplerConfig {
  double sigma = 0.4;
  double roof_weight = 2.0;
  double z_margin = 5.0;  // uniform z range is [z_min - margin, z_max + margin]
  double masked_weight = 0.5;

  void validate() const;
  static SamplerConfig from_kv(const KvConfig& kv) { return from_kv(kv, SamplerConfig()); }
  static SamplerConfig from_kv(const KvConfig& kv, const SamplerConfig& defaults);
  KvConfig to_kv() const;
};

/// Loss weight of a query at (x, y): masked_weight over forest or water, 1 elsewhere.
double query_weight(const SceneModel& scene, double x, double y, const SamplerConfig& cfg);

/// floor(total/5) uniform points inside the window volume, the rest drawn on the true
/// surface (area weighted, roofs counted roof_weight times) and displaced by isotropic
/// Gaussian noise. Displacements leaving the scene extent are redrawn. Uniform points
/// come first in the returned set.
QuerySet sample_training_queries(const SceneModel& scene, const PatchWindow& window, std::size_t total,
                                 const SamplerConfig& cfg, std::uint64_t seed);

/// CSV `x,y,z,o,w,tag`.
void write_query_csv(const QuerySet& q, std::ostream& out);
void write_query_csv(const QuerySet& q, const std::filesystem::path& path);

}  // namespace implicity
