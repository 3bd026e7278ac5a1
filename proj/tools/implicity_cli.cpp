// SPDX-License-Identifier: Apache-2.0
// Command-line front end: one subcommand per pipeline stage plus `demo`.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "implicity/common/error.hpp"
#include "implicity/common/parallel.hpp"
#include "implicity/common/rng.hpp"
#include "implicity/dsm/fusion.hpp"
#include "implicity/eval/metrics.hpp"
#include "implicity/extraction/fields.hpp"
#include "implicity/geometry/raster_io.hpp"
#include "implicity/sampler/queries.hpp"
#include "implicity/scene/render.hpp"
#include "implicity/sensor/simulate.hpp"
#include "implicity/training/presets.hpp"
#include "implicity/training/trainer.hpp"
#include "run_manifest.hpp"

namespace fs = std::filesystem;
using namespace implicity;
using implicity::cli::RunManifest;

namespace {

struct Globals {
  std::string config_file;
  std::vector<std::string> overrides;  // key=value
  std::optional<std::uint64_t> seed;
  std::size_t threads = 0;
  bool deterministic = false;
};

// flag > file > default: the file is loaded first, --set entries replace its keys, and
// dedicated flags are applied by each subcommand afterwards.
KvConfig load_config(const Globals& g) {
  KvConfig kv;
  if (!g.config_file.empty()) {
    if (!fs::exists(g.config_file)) throw InvalidArgument("config file not found: " + g.config_file);
    kv = KvConfig::load(g.config_file);
  }
  KvConfig over;
  for (const auto& s : g.overrides) {
    const auto eq = s.find('=');
    if (eq == std::string::npos || eq == 0) throw InvalidArgument("--set expects key=value, got '" + s + "'");
    over.set(s.substr(0, eq), s.substr(eq + 1));
  }
  kv.merge(over);
  return kv;
}

std::uint64_t resolve_seed(const Globals& g, const KvConfig& kv) {
  if (g.seed) return *g.seed;
  if (kv.has("seed")) return static_cast<std::uint64_t>(kv.get_int("seed", 0));
  if (const char* e = std::getenv("IMPLICITY_SEED")) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(e, &end, 10);
    if (!end || *end != '\0') throw InvalidArgument(std::string("IMPLICITY_SEED is not an integer: ") + e);
    return v;
  }
  return 0;
}

void require_file(const std::string& p) {
  if (!fs::is_regular_file(p)) throw InvalidArgument("input file not found: " + p);
}

fs::path manifest_path(const fs::path& out) {
  if (fs::is_directory(out)) return out / "manifest.json";
  return fs::path(out.string() + ".manifest.json");
}

Rect parse_rect(const std::string& s) {
  Rect r;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf,%lf", &r.x0, &r.y0, &r.x1, &r.y1) != 4 || !(r.x1 > r.x0) || !(r.y1 > r.y0))
    throw InvalidArgument("expected x0,y0,x1,y1 with x1>x0, y1>y0; got '" + s + "'");
  return r;
}

std::vector<Rect> parse_rects(const std::string& s) {
  std::vector<Rect> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';'))
    if (!item.empty()) out.push_back(parse_rect(item));
  return out;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream f(p);
  f << text;
  if (!f) throw Error("cannot write " + p.string());
}

void write_pgm_auto(const RasterGrid& g, const fs::path& p) {
  double lo = 1e300, hi = -1e300;
  for (const double v : g.values())
    if (v != g.nodata()) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(hi > lo)) hi = lo + 1.0;
  write_pgm(g, p, lo, hi);
}

ReferenceProducts reference_for(const SceneModel& scene, const KvConfig& kv) {
  const FusionConfig fc = FusionConfig::from_kv(kv);
  return render_reference_dsm(scene, GridSpec::covering(scene.extent(), fc.grid_spacing));
}

std::array<RasterGrid, 2> load_views(const std::string& list) {
  const auto paths = split_list(list);
  if (paths.empty() || paths.size() > 2) throw InvalidArgument("--images expects one or two comma-separated rasters");
  std::array<RasterGrid, 2> v;
  for (std::size_t k = 0; k < paths.size(); ++k) {
    require_file(paths[k]);
    v[k] = read_grid(paths[k]);
  }
  if (paths.size() == 1) v[1] = v[0];
  return v;
}

// ---- subcommands ---------------------------------------------------------------------

int cmd_synth(const Globals& g, const std::string& out_dir) {
  const KvConfig kv = load_config(g);
  const std::uint64_t seed = resolve_seed(g, kv);
  const SceneConfig sc = SceneConfig::from_kv(kv);
  fs::create_directories(out_dir);
  RunManifest m("synth");
  m.add_seed("scene", seed);
  SceneModel scene;
  {
    RunManifest::Stage st(m, "generate");
    scene = generate_scene(seed, sc);
  }
  const ReferenceProducts ref = reference_for(scene, kv);
  const fs::path d(out_dir);
  save_scene(scene, (d / "scene.txt").string());
  write_grid(ref.dsm, d / "ref_dsm.asc");
  write_grid(ref.building_mask, d / "building_mask.asc");
  write_grid(ref.terrain_mask, d / "terrain_mask.asc");
  write_grid(ref.forest_mask, d / "forest_mask.asc");
  write_grid(ref.water_mask, d / "water_mask.asc");
  write_pgm_auto(ref.dsm, d / "ref_dsm.pgm");
  for (const char* f : {"scene.txt", "ref_dsm.asc", "building_mask.asc", "terrain_mask.asc", "forest_mask.asc",
                        "water_mask.asc", "ref_dsm.pgm"})
    m.add_output(d / f);
  KvConfig snap = sc.to_kv();
  snap.merge(FusionConfig::from_kv(kv).to_kv());
  m.set_config(snap);
  m.write(d / "manifest.json");
  std::printf("scene: %zu buildings, z %.2f..%.2f m -> %s\n", scene.buildings().size(), scene.z_min(), scene.z_max(),
              out_dir.c_str());
  return 0;
}

int cmd_simulate(const Globals& g, const std::string& scene_path, const std::string& out, const std::string& ortho_dir) {
  require_file(scene_path);
  const KvConfig kv = load_config(g);
  const std::uint64_t seed = resolve_seed(g, kv);
  const SceneModel scene = load_scene(scene_path);
  SensorConfig sc = SensorConfig::from_kv(kv);
  sc.seed = kv.has("sensor.seed") ? sc.seed : sub_seed(seed, 10);
  RunManifest m("simulate");
  m.add_input(scene_path);
  m.add_seed("sensor", sc.seed);
  PointCloud pc;
  {
    RunManifest::Stage st(m, "simulate");
    pc = simulate_point_cloud(scene, sc);
  }
  write_point_cloud(pc, out);
  m.add_output(out);
  KvConfig snap = sc.to_kv();
  if (!ortho_dir.empty()) {
    // Ortho views are rectified with the conventional DSM of this cloud.
    const FusionConfig fc = FusionConfig::from_kv(kv);
    const GridSpec grid = GridSpec::covering(scene.extent(), fc.grid_spacing);
    RunManifest::Stage st(m, "ortho");
    const RasterGrid dsm = conventional_dsm(pc, fc, grid);
    const RasterGrid err = error_map(dsm, render_reference_dsm(scene, grid).dsm);
    OrthoConfig oc;
    oc.seed = sub_seed(seed, 11);
    m.add_seed("ortho", oc.seed);
    const OrthoPair op = render_ortho_pair(scene, grid, oc, &err);
    fs::create_directories(ortho_dir);
    for (int k = 0; k < 2; ++k) {
      const fs::path p = fs::path(ortho_dir) / ("view" + std::to_string(k) + ".irg");
      write_grid(op.views[static_cast<std::size_t>(k)], p);
      write_pgm(op.views[static_cast<std::size_t>(k)], fs::path(ortho_dir) / ("view" + std::to_string(k) + ".pgm"), 0, 1);
      m.add_output(p);
      m.add_output(fs::path(ortho_dir) / ("view" + std::to_string(k) + ".pgm"));
    }
    snap.merge(fc.to_kv());
  }
  m.set_config(snap);
  m.write(manifest_path(out));
  std::printf("%zu points -> %s\n", pc.size(), out.c_str());
  return 0;
}

int cmd_fuse(const Globals& g, const std::string& cloud_path, std::optional<double> spacing, const std::string& out,
             const std::string& region, const std::string& ref_path) {
  require_file(cloud_path);
  if (!ref_path.empty()) require_file(ref_path);
  const KvConfig kv = load_config(g);
  FusionConfig fc = FusionConfig::from_kv(kv);
  if (spacing) fc.grid_spacing = *spacing;
  fc.validate();
  RunManifest m("fuse-dsm");
  m.add_input(cloud_path);
  const PointCloud pc = read_point_cloud(cloud_path);
  std::optional<RasterGrid> ref;
  if (!ref_path.empty()) {
    ref = read_grid(ref_path);
    m.add_input(ref_path);
  }
  GridSpec grid = !region.empty() ? GridSpec::covering(parse_rect(region), fc.grid_spacing)
                  : ref                ? ref->spec()
                                       : grid_for_cloud(pc, fc.grid_spacing);
  RasterGrid median, dsm;
  {
    RunManifest::Stage st(m, "fuse");
    median = fuse_median(pc, fc, grid);
    dsm = fill_idw(despike(median, fc), fc);
  }
  write_grid(dsm, out);
  m.add_output(out);
  if (ref) {
    if (!(ref->spec() == grid))
      throw InvalidArgument("reference grid " + ref->spec().describe() + " does not match output grid " + grid.describe());
    // Raw median against the reference on occupied cells, then the filled DSM everywhere.
    std::vector<double> occ;
    for (int r = 0; r < grid.rows; ++r)
      for (int c = 0; c < grid.cols; ++c)
        if (median.valid(r, c) && ref->valid(r, c)) occ.push_back(median.at(r, c) - ref->at(r, c));
    const ClassMetrics mo = summarize_errors(occ);
    const MetricsReport rep = compute_metrics(dsm, *ref, MetricMasks{});
    std::printf("occupied cells: %zu  median-fusion MAE %.6f m\n", mo.count, mo.mae);
    std::printf("filled DSM: MAE %.4f RMSE %.4f MedAE %.4f m\n", rep[MetricClass::Overall].mae,
                rep[MetricClass::Overall].rmse, rep[MetricClass::Overall].medae);
  }
  m.set_config(fc.to_kv());
  m.write(manifest_path(out));
  return 0;
}

int cmd_sample(const Globals& g, const std::string& scene_path, const std::string& window, double side,
               std::size_t count, const std::string& out) {
  require_file(scene_path);
  const KvConfig kv = load_config(g);
  const std::uint64_t seed = resolve_seed(g, kv);
  const SamplerConfig sc = SamplerConfig::from_kv(kv);
  const SceneModel scene = load_scene(scene_path);
  Vec2 o;
  if (std::sscanf(window.c_str(), "%lf,%lf", &o.x, &o.y) != 2) throw InvalidArgument("--window expects x0,y0");
  PatchWindow w;
  w.origin = o;
  w.side = side;
  RunManifest m("sample");
  m.add_input(scene_path);
  m.add_seed("sampler", seed);
  QuerySet q;
  {
    RunManifest::Stage st(m, "sample");
    q = sample_training_queries(scene, w, count, sc, seed);
  }
  write_query_csv(q, fs::path(out));
  m.add_output(out);
  m.set_config(sc.to_kv());
  m.write(manifest_path(out));
  std::printf("%zu queries -> %s\n", q.size(), out.c_str());
  return 0;
}

struct TrainInputs {
  SceneModel scene;
  PointCloud cloud;
  std::array<RasterGrid, 2> views;
  ReferenceProducts ref;
  RasterGrid conventional;
};

int cmd_train(const Globals& g, const std::string& scene_path, const std::string& cloud_path, const std::string& images,
              const std::string& out_dir, const std::string& variant) {
  require_file(scene_path);
  require_file(cloud_path);
  KvConfig kv = load_config(g);
  const std::uint64_t seed = resolve_seed(g, kv);
  ModelConfig mc = ModelConfig::from_kv(kv, desk_model(Variant::Stereo));
  if (!variant.empty()) mc.variant = variant_from_string(variant);
  if (mc.variant != Variant::Zero && images.empty()) throw InvalidArgument("variant needs --images");
  TrainConfig tc = TrainConfig::from_kv(kv, desk_training());
  tc.seed = kv.has("train.seed") ? tc.seed : seed;
  tc.deterministic = tc.deterministic || g.deterministic;
  const FusionConfig fc = FusionConfig::from_kv(kv);

  RunManifest m("train");
  m.add_input(scene_path);
  m.add_input(cloud_path);
  auto in = std::make_unique<TrainInputs>();
  in->scene = load_scene(scene_path);
  in->cloud = read_point_cloud(cloud_path);
  in->ref = render_reference_dsm(in->scene, GridSpec::covering(in->scene.extent(), fc.grid_spacing));
  if (!images.empty()) {
    in->views = load_views(images);
    for (const auto& p : split_list(images)) m.add_input(p);
  } else {
    in->views = {in->ref.dsm, in->ref.dsm};  // placeholders; the zero variant never reads them
  }
  in->conventional = conventional_dsm(in->cloud, fc, in->ref.dsm.spec());

  TrainData td;
  td.scene = &in->scene;
  td.cloud = &in->cloud;
  td.views = {&in->views[0], &in->views[1]};
  td.ref = &in->ref;
  td.split = strip_split(in->scene.extent(), static_cast<int>(kv.get_int("split.strips", 5)),
                         static_cast<int>(kv.get_int("split.val", 3)), static_cast<int>(kv.get_int("split.test", 4)));
  td.sampler = SamplerConfig::from_kv(kv);
  td.val_extraction = ExtractionConfig::from_kv(kv, validation_extraction());
  fit_normalization(mc, in->conventional, images.empty() ? std::array<const RasterGrid*, 2>{} : td.views,
                    td.split.train_bounds, sub_seed(seed, 20));

  fs::create_directories(out_dir);
  const fs::path d(out_dir);
  TrainResult res;
  {
    RunManifest::Stage st(m, "train");
    res = train_model(td, tc, mc, [](const TrainLogRow& r) {
      if (std::isfinite(r.val_mae))
        std::printf("step %ld  lr %.3g  loss %.4f  val MAE %.3f RMSE %.3f MedAE %.3f\n", r.step, r.lr, r.train_loss,
                    r.val_mae, r.val_rmse, r.val_medae);
    });
  }
  save_checkpoint(d / "model.ickp", mc, res.params);
  write_train_log(res.log, d / "train_log.csv");
  m.add_output(d / "model.ickp");
  m.add_output(d / "train_log.csv");
  KvConfig snap = mc.to_kv();
  snap.merge(tc.to_kv());
  snap.merge(td.sampler.to_kv());
  snap.merge(td.val_extraction.to_kv());
  m.set_config(snap);
  m.add_seed("train", tc.seed);
  m.write(d / "manifest.json");
  std::printf("best step %ld, validation MAE %.4f m%s\n", res.best_step, res.best_val_mae,
              res.early_stopped ? " (early stop)" : "");
  return 0;
}

int cmd_reconstruct(const Globals& g, const std::string& ckpt, const std::string& cloud_path, const std::string& images,
                    const std::string& region, const std::string& out, const std::string& slices_dir,
                    const std::string& slice_heights) {
  require_file(ckpt);
  require_file(cloud_path);
  const KvConfig kv = load_config(g);
  const ExtractionConfig ec = ExtractionConfig::from_kv(kv);
  RunManifest m("reconstruct");
  m.add_input(ckpt);
  m.add_input(cloud_path);
  auto [mc, params] = load_checkpoint(ckpt);
  const OccupancyNetwork net(mc, std::move(params));
  const PointCloud pc = read_point_cloud(cloud_path);
  std::array<RasterGrid, 2> views;
  std::array<const RasterGrid*, 2> vp{};
  if (!images.empty()) {
    views = load_views(images);
    vp = {&views[0], &views[1]};
    for (const auto& p : split_list(images)) m.add_input(p);
  } else if (mc.variant != Variant::Zero) {
    throw InvalidArgument(std::string("checkpoint variant ") + to_string(mc.variant) + " needs --images");
  }
  NetworkField field(net, pc, vp);
  const Rect r = parse_rect(region);
  ExtractionStats stats;
  RasterGrid dsm;
  {
    RunManifest::Stage st(m, "extract");
    dsm = extract_dsm(field, r, ec, &stats);
  }
  write_grid(dsm, out);
  m.add_output(out);
  if (!slices_dir.empty()) {
    std::vector<double> hs;
    for (const auto& s : split_list(slice_heights)) hs.push_back(std::stod(s));
    if (hs.empty()) {
      const auto [lo, hi] = field.z_range();
      for (int k = 1; k <= 4; ++k) hs.push_back(lo + (hi - lo) * k / 5.0);
    }
    fs::create_directories(slices_dir);
    const auto sl = occupancy_slices(field, r, ec, hs);
    for (std::size_t k = 0; k < sl.size(); ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "occupancy_z%.2f.asc", hs[k]);
      write_grid(sl[k], fs::path(slices_dir) / name);
      m.add_output(fs::path(slices_dir) / name);
    }
  }
  KvConfig snap = mc.to_kv();
  snap.merge(ec.to_kv());
  m.set_config(snap);
  m.write(manifest_path(out));
  std::printf("%zu windows, %zu columns, %zu queries, %zu floor / %zu ceiling clamped -> %s\n", stats.windows,
              stats.columns, stats.queries, stats.floor_clamped, stats.ceiling_clamped, out.c_str());
  return 0;
}

int cmd_evaluate(const Globals& g, const std::string& pred_path, const std::string& ref_path, const std::string& bmask,
                 const std::string& fmask, const std::string& exclude, const std::string& out,
                 const std::string& err_map) {
  for (const auto& p : {pred_path, ref_path}) require_file(p);
  if (!bmask.empty()) require_file(bmask);
  if (!fmask.empty()) require_file(fmask);
  (void)load_config(g);
  RunManifest m("evaluate");
  const RasterGrid pred = read_grid(pred_path), ref = read_grid(ref_path);
  m.add_input(pred_path);
  m.add_input(ref_path);
  std::optional<RasterGrid> b, f;
  MetricMasks masks;
  std::string prov;
  if (!bmask.empty()) {
    b = read_grid(bmask);
    masks.building = &*b;
    m.add_input(bmask);
    prov += "buildings: " + bmask + " (dilated 2 px)";
  }
  if (!fmask.empty()) {
    f = read_grid(fmask);
    masks.forest = &*f;
    m.add_input(fmask);
    prov += std::string(prov.empty() ? "" : "; ") + "forest: " + fmask;
  }
  masks.provenance = prov.empty() ? "none" : prov;
  if (!exclude.empty()) masks.exclusions = parse_rects(exclude);
  const MetricsReport rep = compute_metrics(pred, ref, masks);
  const std::string text = report_to_json(rep);
  write_text(out, text);
  m.add_output(out);
  if (!err_map.empty()) {
    write_grid(error_map(pred, ref), err_map);
    m.add_output(err_map);
  }
  m.write(manifest_path(out));
  std::fputs(text.c_str(), stdout);
  return 0;
}

int cmd_demo(const Globals& g, const std::string& out_dir) {
  KvConfig kv = load_config(g);
  const std::uint64_t seed = resolve_seed(g, kv);
  fs::create_directories(out_dir);
  const fs::path d(out_dir);
  RunManifest m("demo");
  m.add_seed("demo", seed);

  SceneBundleConfig bc = demo_scene();
  bc.scene = SceneConfig::from_kv(kv, bc.scene);
  bc.sensor = SensorConfig::from_kv(kv, bc.sensor);
  bc.fusion = FusionConfig::from_kv(kv, bc.fusion);
  if (bc.scene.width > 128.0 || bc.scene.height > 128.0) throw InvalidArgument("demo scenes are at most 128 x 128 m");
  SceneBundle b;
  {
    RunManifest::Stage st(m, "scene+sensor+fusion");
    b = build_scene_bundle(seed, bc);
  }
  save_scene(b.scene, (d / "scene.txt").string());
  write_point_cloud(b.cloud, d / "cloud.ipc");
  write_grid(b.ref.dsm, d / "ref_dsm.asc");
  write_grid(b.conventional, d / "conventional_dsm.asc");
  write_grid(b.ortho.views[0], d / "view0.irg");
  write_grid(b.ortho.views[1], d / "view1.irg");

  ModelConfig mc = ModelConfig::from_kv(kv, demo_model());
  TrainConfig tc = TrainConfig::from_kv(kv, demo_training());
  tc.seed = sub_seed(seed, 30);
  tc.deterministic = true;
  TrainData td;
  td.scene = &b.scene;
  td.cloud = &b.cloud;
  td.views = b.views();
  td.ref = &b.ref;
  td.split = strip_split(b.scene.extent());
  td.val_extraction = validation_extraction();
  fit_normalization(mc, b.conventional, b.views(), td.split.train_bounds, sub_seed(seed, 20));
  TrainResult res;
  {
    RunManifest::Stage st(m, "train");
    res = train_model(td, tc, mc);
  }
  save_checkpoint(d / "model.ickp", mc, res.params);
  write_train_log(res.log, d / "train_log.csv");

  const OccupancyNetwork net(mc, res.params);
  RegionEvaluation ev;
  {
    RunManifest::Stage st(m, "reconstruct+evaluate");
    ev = evaluate_region(net, td, td.split.test, ExtractionConfig::from_kv(kv));
  }
  write_grid(ev.dsm, d / "implicity_dsm.asc");
  const RasterGrid ref_test = b.ref.dsm.crop(td.split.test);
  write_grid(error_map(ev.dsm, ref_test), d / "error_map.asc");
  const std::string text = report_to_json(ev.report);
  write_text(d / "report.json", text);
  const MetricsReport conv = score_region(b.conventional, b.ref, td.split.test);
  write_text(d / "conventional_report.json", report_to_json(conv));

  for (const char* f : {"scene.txt", "cloud.ipc", "ref_dsm.asc", "conventional_dsm.asc", "view0.irg", "view1.irg",
                        "model.ickp", "train_log.csv", "implicity_dsm.asc", "error_map.asc", "report.json",
                        "conventional_report.json"})
    m.add_output(d / f);
  KvConfig snap = bc.scene.to_kv();
  snap.merge(bc.sensor.to_kv());
  snap.merge(bc.fusion.to_kv());
  snap.merge(mc.to_kv());
  snap.merge(tc.to_kv());
  m.set_config(snap);
  m.write(d / "manifest.json");
  std::printf("test strip: network (%s) MAE %.3f m, conventional DSM MAE %.3f m\n", to_string(mc.variant),
              ev.report[MetricClass::Overall].mae, conv[MetricClass::Overall].mae);
  std::fputs(text.c_str(), stdout);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"occupancy-network DSM reconstruction on synthetic towns"};
  app.require_subcommand(1);
  app.fallthrough();  // global options may follow the subcommand
  Globals g;
  app.add_option("--config", g.config_file, "key=value configuration file");
  app.add_option("--set", g.overrides, "override one config key (key=value); repeatable");
  app.add_option("--seed", g.seed, "random seed (falls back to IMPLICITY_SEED, then 0)");
  app.add_option("--threads", g.threads, "worker thread cap (0 = all cores)");
  app.add_flag("--deterministic", g.deterministic, "fixed reduction and consumption order");

  std::string out, out_dir, scene, cloud, images, region, ref, ckpt, variant, window = "0,0", slices, slice_heights;
  std::string pred, bmask, fmask, exclude, err_map, ortho_dir;
  std::optional<double> spacing;
  double side = 64.0;
  std::size_t count = 2048;

  auto* synth = app.add_subcommand("synth", "generate a scene, reference DSM and masks");
  synth->add_option("--out-dir", out_dir)->required();

  auto* sim = app.add_subcommand("simulate", "simulate a photogrammetric point cloud (and ortho views)");
  sim->add_option("--scene", scene)->required();
  sim->add_option("--out", out)->required();
  sim->add_option("--ortho-out", ortho_dir, "directory for the rectified ortho pair");

  auto* fuse = app.add_subcommand("fuse-dsm", "conventional DSM: median fusion, despike, IDW fill");
  fuse->add_option("--cloud", cloud)->required();
  fuse->add_option("--spacing", spacing);
  fuse->add_option("--out", out)->required();
  fuse->add_option("--region", region, "x0,y0,x1,y1");
  fuse->add_option("--ref", ref, "reference DSM: fixes the grid and prints errors");

  auto* sample = app.add_subcommand("sample", "training queries for one window as CSV");
  sample->add_option("--scene", scene)->required();
  sample->add_option("--window", window, "origin x0,y0")->required();
  sample->add_option("--side", side);
  sample->add_option("--count", count);
  sample->add_option("--out", out)->required();

  auto* train = app.add_subcommand("train", "train an occupancy network on strips 0-2, validating on strip 3");
  train->add_option("--scene", scene)->required();
  train->add_option("--cloud", cloud)->required();
  train->add_option("--images", images, "view0[,view1]");
  train->add_option("--variant", variant, "zero, mono or stereo");
  train->add_option("--out-dir", out_dir)->required();

  auto* rec = app.add_subcommand("reconstruct", "extract a DSM with a trained network");
  rec->add_option("--checkpoint", ckpt)->required();
  rec->add_option("--cloud", cloud)->required();
  rec->add_option("--images", images, "view0[,view1]");
  rec->add_option("--region", region, "x0,y0,x1,y1")->required();
  rec->add_option("--out", out)->required();
  rec->add_option("--emit-occupancy-slices", slices, "directory for occupancy rasters at fixed heights");
  rec->add_option("--slice-heights", slice_heights, "comma-separated heights in meters");

  auto* ev = app.add_subcommand("evaluate", "MAE / RMSE / MedAE per class");
  ev->add_option("--pred", pred)->required();
  ev->add_option("--ref", ref)->required();
  ev->add_option("--building-mask", bmask);
  ev->add_option("--forest-mask", fmask);
  ev->add_option("--exclude", exclude, "x0,y0,x1,y1[;...]");
  ev->add_option("--out", out)->required();
  ev->add_option("--error-map", err_map);

  auto* demo = app.add_subcommand("demo", "full pipeline on a small scene");
  demo->add_option("--out-dir", out_dir)->required();

  CLI11_PARSE(app, argc, argv);
  set_max_threads(g.threads);
  try {
    if (*synth) return cmd_synth(g, out_dir);
    if (*sim) return cmd_simulate(g, scene, out, ortho_dir);
    if (*fuse) return cmd_fuse(g, cloud, spacing, out, region, ref);
    if (*sample) return cmd_sample(g, scene, window, side, count, out);
    if (*train) return cmd_train(g, scene, cloud, images, out_dir, variant);
    if (*rec) return cmd_reconstruct(g, ckpt, cloud, images, region, out, slices, slice_heights);
    if (*ev) return cmd_evaluate(g, pred, ref, bmask, fmask, exclude, out, err_map);
    if (*demo) return cmd_demo(g, out_dir);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
