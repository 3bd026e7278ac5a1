// SPDX-License-Identifier: Apache-2.0
#include "implicity/geometry/raster_io.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

#include "implicity/common/error.hpp"

namespace implicity {
namespace {

std::ofstream open_out(const std::filesystem::path& path, bool binary) {
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, bool binary) {
  std::ifstream in(path, binary ? std::ios::binary : std::ios::in);
  if (!in) throw Error("cannot open: " + path.string());
  return in;
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

void put_f32_le(std::ostream& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 4);
}

float get_f32_le(const unsigned char* b) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return std::bit_cast<float>(bits);
}

}  // namespace

void write_ascii_grid(const RasterGrid& grid, std::ostream& out) {
  const auto& s = grid.spec();
  // Shortest representation that parses back to the same double.
  char buf[64];
  auto num = [&buf](double v) { return std::string_view(buf, std::to_chars(buf, buf + sizeof buf, v).ptr - buf); };
  out << "ncols " << s.cols << "\n"
      << "nrows " << s.rows << "\n";
  out << "xllcorner " << num(s.x0) << "\n";
  out << "yllcorner " << num(s.y0) << "\n";
  out << "cellsize " << num(s.cell_size) << "\n";
  out << "NODATA_value " << num(grid.nodata()) << "\n";
  std::string line;
  for (int r = s.rows - 1; r >= 0; --r) {
    line.clear();
    for (int c = 0; c < s.cols; ++c) {
      if (c) line += ' ';
      line += num(grid.at(r, c));
    }
    line += '\n';
    out << line;
  }
}

void write_ascii_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  auto out = open_out(path, false);
  write_ascii_grid(grid, out);
  if (!out) throw Error("write failed: " + path.string());
}

RasterGrid read_ascii_grid(std::istream& in) {
  std::map<std::string, double> header;
  const char* keys[] = {"ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"};
  for (int k = 0; k < 6; ++k) {
    std::string key;
    double v = 0;
    if (!(in >> key >> v)) throw FormatError("ASCII grid: truncated header");
    key = lower(key);
    if (key == "xllcenter" || key == "yllcenter") throw FormatError("ASCII grid: center-registered headers unsupported");
    header[key] = v;
  }
  for (const char* k : keys)
    if (!header.count(k)) throw FormatError(std::string("ASCII grid: missing header key ") + k);
  GridSpec s;
  s.cols = static_cast<int>(header["ncols"]);
  s.rows = static_cast<int>(header["nrows"]);
  s.x0 = header["xllcorner"];
  s.y0 = header["yllcorner"];
  s.cell_size = header["cellsize"];
  if (s.cols < 1 || s.rows < 1 || !(s.cell_size > 0)) throw FormatError("ASCII grid: invalid dimensions");
  RasterGrid g(s, 0.0, header["nodata_value"]);
  for (int r = s.rows - 1; r >= 0; --r)
    for (int c = 0; c < s.cols; ++c)
      if (!(in >> g.at(r, c))) throw FormatError("ASCII grid: truncated values");
  return g;
}

RasterGrid read_ascii_grid(const std::filesystem::path& path) {
  auto in = open_in(path, false);
  try {
    return read_ascii_grid(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_binary_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  const auto& s = grid.spec();
  char header[kBinaryGridHeaderSize + 1];
  const int n = std::snprintf(header, sizeof header, "IRG1 %d %d %.9g %.9g %.9g %.9g", s.cols, s.rows,
                              s.x0, s.y0, s.cell_size, grid.nodata());
  if (n < 0 || n >= static_cast<int>(kBinaryGridHeaderSize))
    throw InvalidArgument("raster header does not fit in 48 bytes");
  std::memset(header + n, ' ', kBinaryGridHeaderSize - n);
  header[kBinaryGridHeaderSize - 1] = '\n';
  auto out = open_out(path, true);
  out.write(header, kBinaryGridHeaderSize);
  for (int r = s.rows - 1; r >= 0; --r)
    for (int c = 0; c < s.cols; ++c) put_f32_le(out, static_cast<float>(grid.at(r, c)));
  if (!out) throw Error("write failed: " + path.string());
}

RasterGrid read_binary_grid(const std::filesystem::path& path) {
  auto in = open_in(path, true);
  char header[kBinaryGridHeaderSize + 1] = {};
  if (!in.read(header, kBinaryGridHeaderSize)) throw FormatError(path.string() + ": truncated header");
  std::istringstream hs(std::string(header, kBinaryGridHeaderSize));
  std::string magic;
  GridSpec s;
  double nodata = 0;
  if (!(hs >> magic >> s.cols >> s.rows >> s.x0 >> s.y0 >> s.cell_size >> nodata) || magic != "IRG1")
    throw FormatError(path.string() + ": bad binary grid header");
  if (s.cols < 1 || s.rows < 1 || !(s.cell_size > 0)) throw FormatError(path.string() + ": invalid dimensions");
  RasterGrid g(s, 0.0, static_cast<float>(nodata));
  std::vector<unsigned char> buf(s.size() * 4);
  if (!in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
    throw FormatError(path.string() + ": truncated values");
  std::size_t k = 0;
  for (int r = s.rows - 1; r >= 0; --r)
    for (int c = 0; c < s.cols; ++c, k += 4) g.at(r, c) = get_f32_le(&buf[k]);
  return g;
}

void write_grid(const RasterGrid& grid, const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".bin" || ext == ".irg")
    write_binary_grid(grid, path);
  else
    write_ascii_grid(grid, path);
}

RasterGrid read_grid(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".bin" || ext == ".irg") return read_binary_grid(path);
  return read_ascii_grid(path);
}

void write_pgm(const RasterGrid& grid, const std::filesystem::path& path, double lo, double hi) {
  if (!(hi > lo)) throw InvalidArgument("PGM range must satisfy hi > lo");
  auto out = open_out(path, true);
  out << "P5\n" << grid.cols() << " " << grid.rows() << "\n255\n";
  for (int r = grid.rows() - 1; r >= 0; --r) {
    for (int c = 0; c < grid.cols(); ++c) {
      unsigned char px = 0;
      if (grid.valid(r, c)) {
        const double t = std::clamp((grid.at(r, c) - lo) / (hi - lo), 0.0, 1.0);
        px = static_cast<unsigned char>(std::lround(t * 255.0));
      }
      out.put(static_cast<char>(px));
    }
  }
  if (!out) throw Error("write failed: " + path.string());
}

}  // namespace implicity
