// SPDX-License-Identifier: Apache-2.0
#include "run_manifest.hpp"

#include <cstdio>
#include <fstream>

#include "implicity/common/error.hpp"
#include "json.hpp"

namespace implicity::cli {

std::uint64_t fnv1a_file(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InvalidArgument("cannot read " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 16];
  while (f) {
    f.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < f.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  return h;
}

namespace {

std::string hex(std::uint64_t v) {
  char b[17];
  std::snprintf(b, sizeof b, "%016llx", static_cast<unsigned long long>(v));
  return b;
}

nlohmann::ordered_json files(const std::vector<std::filesystem::path>& ps) {
  auto a = nlohmann::ordered_json::array();
  for (const auto& p : ps) a.push_back({{"path", p.string()}, {"fnv1a64", hex(fnv1a_file(p))}});
  return a;
}

}  // namespace

void RunManifest::write(const std::filesystem::path& path) const {
  for (const auto& p : outputs_) {
    std::error_code ec;
    if (!std::filesystem::is_regular_file(p, ec) || std::filesystem::file_size(p, ec) == 0)
      throw Error("declared output was not written: " + p.string());
  }
  nlohmann::ordered_json j;
  j["tool"] = "implicity";
  j["version"] = IMPLICITY_VERSION;
  j["subcommand"] = subcommand_;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config_.values()) cfg[k] = v;
  j["config"] = cfg;
  nlohmann::ordered_json seeds = nlohmann::ordered_json::object();
  for (const auto& [k, v] : seeds_) seeds[k] = v;
  j["seeds"] = seeds;
  j["inputs"] = files(inputs_);
  j["outputs"] = files(outputs_);
  nlohmann::ordered_json t = nlohmann::ordered_json::object();
  for (const auto& [k, v] : timings_) t[k] = v;
  j["timings_s"] = t;
  std::ofstream f(path);
  f << j.dump(2) << "\n";
  if (!f) throw Error("cannot write manifest " + path.string());
}

}  // namespace implicity::cli
