// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <iosfwd>

#include "implicity/geometry/raster_grid.hpp"

namespace implicity {

/// ESRI ASCII grid (north-up rows).
void write_ascii_grid(const RasterGrid& grid, std::ostream& out);
void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path);
RasterGrid read_ascii_grid(std::istream& in);
RasterGrid read_ascii_grid(const std::filesystem::path& path);

/// Binary grid: a 48-byte space-padded text header
///   "IRG1 <ncols> <nrows> <xllcorner> <yllcorner> <cellsize> <NODATA_value>\n"
/// followed by ncols*nrows little-endian float32 values, north-up rows.
inline constexpr std::size_t kBinaryGridHeaderSize = 48;
void write_binary_grid(const RasterGrid& grid, const std::filesystem::path& path);
RasterGrid read_binary_grid(const std::filesystem::path& path);

/// Dispatches on extension: ".bin"/".irg" binary, anything else ESRI ASCII.
void write_grid(const RasterGrid& grid, const std::filesystem::path& path);
RasterGrid read_grid(const std::filesystem::path& path);

/// 8-bit binary PGM, north-up, values linearly mapped from [lo, hi]; nodata -> 0.
void write_pgm(const RasterGrid& grid, const std::filesystem::path& path, double lo, double hi);

}  // namespace implicity
