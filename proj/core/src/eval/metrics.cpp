// SPDX-License-Identifier: Apache-2.0
#include "implicity/eval/metrics.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

#include "implicity/common/error.hpp"

namespace implicity {

const char* to_string(MetricClass c) {
  switch (c) {
    case MetricClass::Overall: return "overall";
    case MetricClass::Buildings: return "buildings";
    case MetricClass::Terrain: return "terrain";
    case MetricClass::TerrainNoForest: return "terrain_no_forest";
  }
  return "?";
}

namespace {

bool set_at(const RasterGrid& m, int r, int c) { return m.valid(r, c) && m.at(r, c) != 0.0; }

void require_same_grid(const RasterGrid& a, const char* an, const RasterGrid& b, const char* bn) {
  if (!(a.spec() == b.spec()))
    throw InvalidArgument(std::string("grid mismatch: ") + an + " " + a.spec().describe() + " vs " + bn + " " +
                          b.spec().describe());
}

}  // namespace

RasterGrid dilate_mask(const RasterGrid& mask, int pixels) {
  if (pixels < 0) throw InvalidArgument("dilation radius must be >= 0");
  const int R = mask.rows(), C = mask.cols();
  // Separable: a square element is a row pass followed by a column pass.
  std::vector<char> src(mask.spec().size()), rowpass(src.size(), 0);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c) src[mask.index(r, c)] = set_at(mask, r, c);
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      for (int k = std::max(0, c - pixels); k <= std::min(C - 1, c + pixels); ++k)
        if (src[mask.index(r, k)]) {
          rowpass[mask.index(r, c)] = 1;
          break;
        }
  RasterGrid out(mask.spec(), 0.0, mask.nodata());
  for (int r = 0; r < R; ++r)
    for (int c = 0; c < C; ++c)
      for (int k = std::max(0, r - pixels); k <= std::min(R - 1, r + pixels); ++k)
        if (rowpass[mask.index(k, c)]) {
          out.at(r, c) = 1.0;
          break;
        }
  return out;
}

ClassMetrics summarize_errors(std::vector<double> errors) {
  ClassMetrics m;
  m.count = errors.size();
  if (errors.empty()) return m;
  m.present = true;
  double sa = 0.0, s2 = 0.0;
  for (double& e : errors) {
    e = std::abs(e);
    sa += e;
    s2 += e * e;
  }
  const double n = static_cast<double>(errors.size());
  m.mae = sa / n;
  m.rmse = std::sqrt(s2 / n);
  const auto mid = errors.begin() + static_cast<std::ptrdiff_t>((errors.size() - 1) / 2);
  std::nth_element(errors.begin(), mid, errors.end());
  m.medae = *mid;
  return m;
}

MetricsReport compute_metrics(const RasterGrid& pred, const RasterGrid& ref, const MetricMasks& masks) {
  require_same_grid(pred, "pred", ref, "ref");
  if (masks.building) require_same_grid(*masks.building, "building mask", ref, "ref");
  if (masks.forest) require_same_grid(*masks.forest, "forest mask", ref, "ref");

  RasterGrid dilated;
  if (masks.building) dilated = dilate_mask(*masks.building, masks.building_dilation);

  std::array<std::vector<double>, 4> err;
  MetricsReport rep;
  rep.provenance = masks.provenance;
  for (int r = 0; r < ref.rows(); ++r)
    for (int c = 0; c < ref.cols(); ++c) {
      const Vec2 p = ref.cell_center(r, c);
      const bool excluded = std::any_of(masks.exclusions.begin(), masks.exclusions.end(),
                                        [&](const Rect& x) { return x.contains(p.x, p.y); });
      if (excluded) {
        ++rep.excluded_pixels;
        continue;
      }
      if (!pred.valid(r, c) || !ref.valid(r, c)) continue;
      const double e = pred.at(r, c) - ref.at(r, c);
      if (!std::isfinite(e)) throw NumericError("non-finite height in metric input");
      err[0].push_back(e);
      const bool building = masks.building && set_at(*masks.building, r, c);
      if (masks.building && dilated.at(r, c) != 0.0) err[1].push_back(e);
      if (!building) {
        err[2].push_back(e);
        if (!(masks.forest && set_at(*masks.forest, r, c))) err[3].push_back(e);
      }
    }
  rep.excluded_area = static_cast<double>(rep.excluded_pixels) * ref.cell_size() * ref.cell_size();
  for (std::size_t k = 0; k < 4; ++k) {
    rep.classes[k] = summarize_errors(std::move(err[k]));
    const auto& m = rep.classes[k];
    if (m.present && m.mae > m.rmse * (1.0 + 1e-12))
      throw NumericError(std::string("MAE exceeds RMSE for class ") + to_string(kMetricClasses[k]));
  }
  return rep;
}

std::string report_to_json(const MetricsReport& report) {
  nlohmann::ordered_json j;
  for (const MetricClass c : kMetricClasses) {
    const ClassMetrics& m = report[c];
    nlohmann::ordered_json e;
    if (m.present) {
      e["mae"] = m.mae;
      e["rmse"] = m.rmse;
      e["medae"] = m.medae;
      e["count"] = m.count;
    } else {
      e["absent"] = true;
      e["count"] = 0;
    }
    j[to_string(c)] = e;
  }
  j["mask_provenance"] = report.provenance;
  j["excluded_pixels"] = report.excluded_pixels;
  j["excluded_area_m2"] = report.excluded_area;
  return j.dump(2) + "\n";
}

RasterGrid error_map(const RasterGrid& pred, const RasterGrid& ref) {
  require_same_grid(pred, "pred", ref, "ref");
  RasterGrid out(ref.spec(), kDefaultNodata, kDefaultNodata);
  for (int r = 0; r < ref.rows(); ++r)
    for (int c = 0; c < ref.cols(); ++c)
      if (pred.valid(r, c) && ref.valid(r, c)) out.at(r, c) = pred.at(r, c) - ref.at(r, c);
  return out;
}

}  // namespace implicity
