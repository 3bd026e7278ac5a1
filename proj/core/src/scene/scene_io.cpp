// SPDX-License-Identifier: Apache-2.0
#include <fstream>
#include <sstream>

#include "implicity/common/error.hpp"
#include "implicity/scene/scene.hpp"

namespace implicity {
namespace {

constexpr const char* kMagic = "implicity-scene 1";

std::string join(std::initializer_list<double> vals) {
  std::string s;
  for (double v : vals) {
    if (!s.empty()) s += ' ';
    s += format_double(v);
  }
  return s;
}

std::vector<double> numbers(const std::string& s) {
  std::istringstream in(s);
  std::vector<double> out;
  double v;
  while (in >> v) out.push_back(v);
  if (!in.eof()) throw FormatError("scene: bad numeric list: " + s);
  return out;
}

void expect_count(const std::vector<double>& v, std::size_t n, const std::string& key) {
  if (v.size() != n) throw FormatError("scene: key '" + key + "' expects " + std::to_string(n) + " numbers");
}

}  // namespace

std::string serialize_scene(const SceneModel& scene) {
  std::ostringstream out;
  out << kMagic << "\n";
  out << "[scene]\n";
  out << "seed=" << scene.seed() << "\n";
  const auto& e = scene.extent();
  out << "extent=" << join({e.x0, e.y0, e.x1, e.y1}) << "\n";
  out << "[config]\n" << scene.config().to_kv().to_string();
  out << "[terrain]\n";
  out << "base=" << format_double(scene.terrain().base) << "\n";
  for (const auto& w : scene.terrain().waves)
    out << "wave=" << join({w.amplitude, w.kx, w.ky, w.phase}) << "\n";
  for (const auto& b : scene.buildings()) {
    out << "[building]\n";
    out << "id=" << b.id << "\n";
    out << "center=" << join({b.center.x, b.center.y}) << "\n";
    out << "angle=" << format_double(b.angle) << "\n";
    out << "half_length=" << format_double(b.half_length) << "\n";
    out << "half_width=" << format_double(b.half_width) << "\n";
    out << "eave=" << format_double(b.eave) << "\n";
    out << "roof=" << to_string(b.roof) << "\n";
    out << "ridge_rise=" << format_double(b.ridge_rise) << "\n";
    for (const auto& d : b.dormers)
      out << "dormer=" << join({d.u0, d.u1, d.v_inner, d.v_outer, static_cast<double>(d.side), d.top}) << "\n";
  }
  auto polys = [&](const char* tag, const std::vector<Polygon>& ps) {
    for (const auto& p : ps) {
      out << "[" << tag << "]\nvertices=";
      for (std::size_t i = 0; i < p.vertices.size(); ++i)
        out << (i ? " " : "") << format_double(p.vertices[i].x) << " " << format_double(p.vertices[i].y);
      out << "\n";
    }
  };
  polys("forest", scene.forests());
  polys("water", scene.waters());
  return out.str();
}

SceneModel parse_scene(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw FormatError("scene: missing or unsupported version header");
  std::uint64_t seed = 0;
  Rect extent{};
  KvConfig config_kv;
  Terrain terrain;
  std::vector<Building> buildings;
  std::vector<Polygon> forests, waters;
  std::string section;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError("scene line " + std::to_string(lineno) + ": bad section");
      section = line.substr(1, line.size() - 2);
      if (section == "building") buildings.emplace_back();
      else if (section == "forest") forests.emplace_back();
      else if (section == "water") waters.emplace_back();
      else if (section != "scene" && section != "config" && section != "terrain")
        throw FormatError("scene: unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("scene line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (section == "scene") {
      if (key == "seed") seed = std::stoull(val);
      else if (key == "extent") {
        const auto v = numbers(val);
        expect_count(v, 4, key);
        extent = {v[0], v[1], v[2], v[3]};
      }
    } else if (section == "config") {
      config_kv.set(key, val);
    } else if (section == "terrain") {
      if (key == "base") terrain.base = std::stod(val);
      else if (key == "wave") {
        const auto v = numbers(val);
        expect_count(v, 4, key);
        terrain.waves.push_back({v[0], v[1], v[2], v[3]});
      }
    } else if (section == "building") {
      auto& b = buildings.back();
      if (key == "id") b.id = std::stoi(val);
      else if (key == "center") {
        const auto v = numbers(val);
        expect_count(v, 2, key);
        b.center = {v[0], v[1]};
      } else if (key == "angle") b.angle = std::stod(val);
      else if (key == "half_length") b.half_length = std::stod(val);
      else if (key == "half_width") b.half_width = std::stod(val);
      else if (key == "eave") b.eave = std::stod(val);
      else if (key == "roof") b.roof = roof_type_from_string(val);
      else if (key == "ridge_rise") b.ridge_rise = std::stod(val);
      else if (key == "dormer") {
        const auto v = numbers(val);
        expect_count(v, 6, key);
        b.dormers.push_back({v[0], v[1], v[2], v[3], static_cast<int>(v[4]), v[5]});
      } else {
        throw FormatError("scene: unknown building key " + key);
      }
    } else if (section == "forest" || section == "water") {
      auto& p = section == "forest" ? forests.back() : waters.back();
      const auto v = numbers(val);
      if (v.size() % 2 != 0 || v.size() < 6) throw FormatError("scene: polygon needs >= 3 vertices");
      for (std::size_t i = 0; i < v.size(); i += 2) p.vertices.push_back({v[i], v[i + 1]});
    } else {
      throw FormatError("scene line " + std::to_string(lineno) + ": key outside a section");
    }
  }
  const SceneConfig cfg = SceneConfig::from_kv(config_kv);
  return SceneModel(seed, cfg, extent, std::move(terrain), std::move(buildings), std::move(forests),
                    std::move(waters));
}

void save_scene(const SceneModel& scene, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot open for writing: " + path);
  out << serialize_scene(scene);
  if (!out) throw Error("write failed: " + path);
}

SceneModel load_scene(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

}  // namespace implicity
