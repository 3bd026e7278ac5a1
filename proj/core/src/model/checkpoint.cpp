// SPDX-License-Identifier: Apache-2.0
#include <bit>
#include <cstring>
#include <fstream>

#include "implicity/common/error.hpp"
#include "implicity/model/occupancy_model.hpp"

namespace implicity {
namespace {

constexpr char kMagic[4] = {'I', 'C', 'K', 'P'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                              static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& in, const std::string& what) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw FormatError("checkpoint truncated while reading " + what);
  return b[0] | (b[1] << 8) | (b[2] << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

std::string get_bytes(std::istream& in, std::uint32_t n, const std::string& what) {
  if (n > (1u << 26)) throw FormatError("checkpoint " + what + " length is implausible");
  std::string s(n, '\0');
  if (n && !in.read(s.data(), n)) throw FormatError("checkpoint truncated while reading " + what);
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  out.write(kMagic, 4);
  put_u32(out, kVersion);
  const std::string text = cfg.to_kv().to_string();
  put_u32(out, static_cast<std::uint32_t>(text.size()));
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u32(out, static_cast<std::uint32_t>(params.size()));
  for (const auto& p : params.all()) {
    put_u32(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put_u32(out, 2);
    put_u32(out, static_cast<std::uint32_t>(p.value.rows()));
    put_u32(out, static_cast<std::uint32_t>(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) put_u32(out, std::bit_cast<std::uint32_t>(p.value.data()[i]));
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw FormatError(path.string() + " is not a checkpoint");
  const std::uint32_t version = get_u32(in, "version");
  if (version != kVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));
  const ModelConfig cfg = ModelConfig::from_kv(KvConfig::parse(get_bytes(in, get_u32(in, "config"), "config")));
  ModelParams expected = init_params<float>(cfg, 0);
  const std::uint32_t n = get_u32(in, "record count");
  if (n != expected.size())
    throw FormatError("checkpoint holds " + std::to_string(n) + " tensors, config implies " +
                      std::to_string(expected.size()));
  for (auto& p : expected.all()) {
    const std::string name = get_bytes(in, get_u32(in, "name length"), "name");
    if (name != p.name) throw FormatError("checkpoint tensor '" + name + "' found where '" + p.name + "' was expected");
    const std::uint32_t ndim = get_u32(in, "ndim");
    if (ndim != 2) throw FormatError("tensor " + name + " has " + std::to_string(ndim) + " dimensions, expected 2");
    const std::uint32_t rows = get_u32(in, "shape"), cols = get_u32(in, "shape");
    if (rows != p.value.rows() || cols != p.value.cols())
      throw FormatError("tensor " + name + " has shape " + std::to_string(rows) + "x" + std::to_string(cols) +
                        ", config implies " + std::to_string(p.value.rows()) + "x" + std::to_string(p.value.cols()));
    for (Eigen::Index i = 0; i < p.value.size(); ++i) p.value.data()[i] = std::bit_cast<float>(get_u32(in, name));
  }
  if (in.peek() != std::char_traits<char>::eof()) throw FormatError("trailing bytes after the last checkpoint tensor");
  return {cfg, std::move(expected)};
}

}  // namespace implicity
