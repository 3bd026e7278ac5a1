// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "implicity/geometry/vec.hpp"

namespace implicity {

inline constexpr double kDefaultNodata = -9999.0;

/// Placement of a raster: lower-left corner, square cell size, dimensions.
struct GridSpec {
  double x0 = 0.0;
  double y0 = 0.0;
  double cell_size = 1.0;
  int rows = 1;
  int cols = 1;

  /// Grid covering `r` with the given spacing; r's extent must be a multiple of it.
  static GridSpec covering(const Rect& r, double cell_size);

  Rect extent() const { return {x0, y0, x0 + cols * cell_size, y0 + rows * cell_size}; }
  std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
  bool operator==(const GridSpec&) const = default;
  std::string describe() const;
};

/// Georeferenced scalar grid. Row 0 is the southernmost row; values are anchored at
/// cell centers.
class RasterGrid {
 public:
  RasterGrid() = default;
  explicit RasterGrid(const GridSpec& spec, double fill = 0.0, double nodata = kDefaultNodata);

  const GridSpec& spec() const { return spec_; }
  int rows() const { return spec_.rows; }
  int cols() const { return spec_.cols; }
  double cell_size() const { return spec_.cell_size; }
  double nodata() const { return nodata_; }
  void set_nodata(double v) { nodata_ = v; }

  double& at(int row, int col) { return values_[index(row, col)]; }
  double at(int row, int col) const { return values_[index(row, col)]; }
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * spec_.cols + col;
  }

  bool valid(int row, int col) const { return at(row, col) != nodata_; }
  bool in_bounds(int row, int col) const {
    return row >= 0 && col >= 0 && row < spec_.rows && col < spec_.cols;
  }

  Vec2 cell_center(int row, int col) const;
  /// (row, col) of the cell containing (x, y); may be out of bounds.
  std::pair<int, int> world_to_cell(double x, double y) const;

  std::span<double> values() { return values_; }
  std::span<const double> values() const { return values_; }
  std::size_t count_valid() const;

  /// Sub-grid of whole cells; `r` must align with the cell lattice.
  RasterGrid crop(const Rect& r) const;

 private:
  GridSpec spec_{};
  double nodata_ = kDefaultNodata;
  std::vector<double> values_;
};

}  // namespace implicity
