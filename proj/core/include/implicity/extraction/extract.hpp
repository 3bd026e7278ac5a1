// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <limits>
#include <memory>
#include <span>
#include <vector>

#include "implicity/common/kv_config.hpp"
#include "implicity/geometry/raster_grid.hpp"
#include "implicity/geometry/vec.hpp"

namespace implicity {

struct ExtractionConfig {
  double dsm_spacing = 0.25;
  double z0_spacing = 16.0;
  int refine_factor = 4;
  int iterations = 4;
  double threshold = 0.5;
  double window = 64.0;
  double stride = 32.0;
  // Vertical search range; NaN means "ask the field".
  double z_lo = std::numeric_limits<double>::quiet_NaN();
  double z_hi = std::numeric_limits<double>::quiet_NaN();
  double taper_floor = 1e-3;  // smallest blending weight inside a window
  std::size_t batch = 16384;  // queries per field evaluation

  double final_spacing() const;
  void validate() const;
  static ExtractionConfig from_kv(const KvConfig& kv) { return from_kv(kv, ExtractionConfig()); }
  static ExtractionConfig from_kv(const KvConfig& kv, const ExtractionConfig& defaults);
  KvConfig to_kv() const;
};

/// Occupancy probability as a function of world position, evaluated one window at a
/// time. begin_window is called once before the window's columns are evaluated.
class OccupancyField {
 public:
  virtual ~OccupancyField() = default;
  virtual void begin_window(const Rect& window) = 0;
  virtual void evaluate(std::span<const Vec3> points, std::span<float> out) const = 0;
  /// Horizontal area the field's inputs cover.
  virtual Rect coverage() const = 0;
  /// Default vertical search range.
  virtual std::pair<double, double> z_range() const = 0;
};

struct ColumnResult {
  double z = 0.0;
  bool floor_clamped = false;
  bool ceiling_clamped = false;
  int queries = 0;
};

/// Coarse levels z_lo + k*z0_spacing up to the first level >= z_hi, then `iterations`
/// refinements of the bracket above the highest occupied point, each probing
/// refine_factor-1 new heights. o >= threshold counts as occupied.
using ColumnFn = std::function<void(std::span<const double> z, std::span<float> out)>;
ColumnResult refine_column(const ColumnFn& fn, const ExtractionConfig& cfg, double z_lo, double z_hi);

/// Number of coarse levels for a range.
int coarse_levels(const ExtractionConfig& cfg, double z_lo, double z_hi);

struct ExtractionStats {
  std::size_t windows = 0;
  std::size_t columns = 0;
  std::size_t queries = 0;
  std::size_t floor_clamped = 0;
  std::size_t ceiling_clamped = 0;
};

/// Sliding-window DSM over `region` (aligned to dsm_spacing). Overlapping windows are
/// blended with a linear taper across the overlap. Windows are slid inward to stay inside
/// the field's coverage when the region allows; otherwise throws InvalidArgument naming
/// the windows that leave it.
RasterGrid extract_dsm(OccupancyField& field, const Rect& region, const ExtractionConfig& cfg,
                       ExtractionStats* stats = nullptr);

/// Window origins along one axis: start, start+stride, ..., and a final window flush with
/// the end. A range shorter than the window gets one centered window.
std::vector<double> window_origins(double lo, double hi, double window, double stride, double snap);

/// Occupancy probability rasters at fixed heights (debug output).
std::vector<RasterGrid> occupancy_slices(OccupancyField& field, const Rect& region, const ExtractionConfig& cfg,
                                         std::span<const double> heights);

}  // namespace implicity
