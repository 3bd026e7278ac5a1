// SPDX-License-Identifier: Apache-2.0
#include "implicity/geometry/raster_grid.hpp"

#include <cmath>
#include <cstdio>

#include "implicity/common/error.hpp"

namespace implicity {
namespace {

int whole_cells(double length, double cell, const char* what) {
  const double n = length / cell;
  const double r = std::round(n);
  if (r < 1.0 || std::abs(n - r) > 1e-6)
    throw InvalidArgument(std::string("extent along ") + what + " is not a whole number of cells");
  return static_cast<int>(r);
}

}  // namespace

GridSpec GridSpec::covering(const Rect& r, double cell_size) {
  if (!(cell_size > 0.0)) throw InvalidArgument("cell_size must be positive");
  GridSpec s;
  s.x0 = r.x0;
  s.y0 = r.y0;
  s.cell_size = cell_size;
  s.cols = whole_cells(r.width(), cell_size, "x");
  s.rows = whole_cells(r.height(), cell_size, "y");
  return s;
}

std::string GridSpec::describe() const {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%dx%d cells @ %g m, origin (%g, %g)", rows, cols, cell_size, x0, y0);
  return buf;
}

RasterGrid::RasterGrid(const GridSpec& spec, double fill, double nodata)
    : spec_(spec), nodata_(nodata) {
  if (!(spec.cell_size > 0.0)) throw InvalidArgument("cell_size must be positive");
  if (spec.rows < 1 || spec.cols < 1) throw InvalidArgument("raster needs at least one row and column");
  values_.assign(spec.size(), fill);
}

Vec2 RasterGrid::cell_center(int row, int col) const {
  return {spec_.x0 + (col + 0.5) * spec_.cell_size, spec_.y0 + (row + 0.5) * spec_.cell_size};
}

std::pair<int, int> RasterGrid::world_to_cell(double x, double y) const {
  const int col = static_cast<int>(std::floor((x - spec_.x0) / spec_.cell_size));
  const int row = static_cast<int>(std::floor((y - spec_.y0) / spec_.cell_size));
  return {row, col};
}

std::size_t RasterGrid::count_valid() const {
  std::size_t n = 0;
  for (double v : values_) n += (v != nodata_);
  return n;
}

RasterGrid RasterGrid::crop(const Rect& r) const {
  const double cs = spec_.cell_size;
  const double fc = (r.x0 - spec_.x0) / cs;
  const double fr = (r.y0 - spec_.y0) / cs;
  const int c0 = static_cast<int>(std::lround(fc));
  const int r0 = static_cast<int>(std::lround(fr));
  if (std::abs(fc - c0) > 1e-6 || std::abs(fr - r0) > 1e-6)
    throw InvalidArgument("crop rectangle is not aligned with the raster cells");
  GridSpec sub = GridSpec::covering(r, cs);
  sub.x0 = spec_.x0 + c0 * cs;
  sub.y0 = spec_.y0 + r0 * cs;
  if (r0 < 0 || c0 < 0 || r0 + sub.rows > spec_.rows || c0 + sub.cols > spec_.cols)
    throw InvalidArgument("crop rectangle exceeds raster extent");
  RasterGrid out(sub, 0.0, nodata_);
  for (int i = 0; i < sub.rows; ++i)
    for (int j = 0; j < sub.cols; ++j) out.at(i, j) = at(r0 + i, c0 + j);
  return out;
}

}  // namespace implicity
