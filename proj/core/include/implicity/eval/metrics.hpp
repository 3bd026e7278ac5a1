// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <string>
#include <vector>

#include "implicity/geometry/raster_grid.hpp"

namespace implicity {

/// Square structuring element of the given radius; nonzero valid cells count as set.
RasterGrid dilate_mask(const RasterGrid& mask, int pixels = 2);

enum class MetricClass { Overall, Buildings, Terrain, TerrainNoForest };
inline constexpr std::array<MetricClass, 4> kMetricClasses{MetricClass::Overall, MetricClass::Buildings,
                                                           MetricClass::Terrain, MetricClass::TerrainNoForest};
const char* to_string(MetricClass c);

struct ClassMetrics {
  bool present = false;  // false when the class has no valid pixel
  double mae = 0.0;
  double rmse = 0.0;
  double medae = 0.0;    // lower median of |e|
  std::size_t count = 0;
};

struct MetricMasks {
  const RasterGrid* building = nullptr;  // without it, buildings is absent and terrain = overall
  const RasterGrid* forest = nullptr;
  std::vector<Rect> exclusions;          // cells whose center lies inside are ignored
  int building_dilation = 2;
  std::string provenance;
};

struct MetricsReport {
  std::array<ClassMetrics, 4> classes{};
  std::string provenance;
  std::size_t excluded_pixels = 0;
  double excluded_area = 0.0;  // square meters
  const ClassMetrics& operator[](MetricClass c) const { return classes[static_cast<std::size_t>(c)]; }
};

/// Metrics of e = pred - ref over cells valid in both and not excluded. Throws
/// InvalidArgument on grid mismatch (message names both grids) and NumericError if
/// MAE > RMSE for any class.
MetricsReport compute_metrics(const RasterGrid& pred, const RasterGrid& ref, const MetricMasks& masks);

/// MAE/RMSE/MedAE of a plain error list.
ClassMetrics summarize_errors(std::vector<double> errors);

/// Pretty-printed JSON with a fixed key order.
std::string report_to_json(const MetricsReport& report);

/// Signed pred - ref; nodata where either input is nodata.
RasterGrid error_map(const RasterGrid& pred, const RasterGrid& ref);

}  // namespace implicity
