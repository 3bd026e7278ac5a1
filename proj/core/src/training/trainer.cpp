// SPDX-License-Identifier: Apache-2.0
#include "implicity/training/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "implicity/common/error.hpp"
#include "implicity/common/parallel.hpp"
#include "implicity/common/rng.hpp"
#include "implicity/extraction/fields.hpp"
#include "implicity/model/window_inputs.hpp"
#include "implicity/training/optim.hpp"

namespace implicity {

namespace {

std::string rects_to_string(const std::vector<Rect>& rs) {
  std::string s;
  for (const Rect& r : rs) {
    if (!s.empty()) s += ';';
    s += format_double(r.x0) + "," + format_double(r.y0) + "," + format_double(r.x1) + "," + format_double(r.y1);
  }
  return s;
}

std::vector<Rect> rects_from_string(const std::string& s) {
  std::vector<Rect> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.empty()) continue;
    Rect r;
    if (std::sscanf(item.c_str(), "%lf,%lf,%lf,%lf", &r.x0, &r.y0, &r.x1, &r.y1) != 4 || !(r.x1 > r.x0) ||
        !(r.y1 > r.y0))
      throw InvalidArgument("bad rectangle '" + item + "', expected x0,y0,x1,y1");
    out.push_back(r);
  }
  return out;
}

}  // namespace

void TrainConfig::validate() const {
  if (!(base_lr > 0) || !(cycle_amplitude >= 0) || cycle_length <= 0) throw InvalidArgument("bad learning-rate schedule");
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1) || weight_decay < 0)
    throw InvalidArgument("bad optimizer settings");
  if (accumulation < 1 || batch < 1 || queries_per_patch < 5) throw InvalidArgument("accumulation, batch >= 1; queries >= 5");
  if (max_steps < 1 || eval_every < 0 || patience < 1 || min_improvement < 0) throw InvalidArgument("bad stopping settings");
  if (!(window > 0)) throw InvalidArgument("train window must be positive");
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv, const TrainConfig& d) {
  TrainConfig c = d;
  c.base_lr = kv.get_double("train.base_lr", d.base_lr);
  c.cycle_amplitude = kv.get_double("train.cycle_amplitude", d.cycle_amplitude);
  c.cycle_length = kv.get_int("train.cycle_length", d.cycle_length);
  c.beta1 = kv.get_double("train.beta1", d.beta1);
  c.beta2 = kv.get_double("train.beta2", d.beta2);
  c.weight_decay = kv.get_double("train.weight_decay", d.weight_decay);
  c.accumulation = static_cast<int>(kv.get_int("train.accumulation", d.accumulation));
  c.batch = static_cast<int>(kv.get_int("train.batch", d.batch));
  c.queries_per_patch = static_cast<int>(kv.get_int("train.queries_per_patch", d.queries_per_patch));
  c.max_steps = kv.get_int("train.max_steps", d.max_steps);
  c.eval_every = kv.get_int("train.eval_every", d.eval_every);
  c.patience = static_cast<int>(kv.get_int("train.patience", d.patience));
  c.min_improvement = kv.get_double("train.min_improvement", d.min_improvement);
  c.window = kv.get_double("train.window", d.window);
  c.augment = kv.get_bool("train.augment", d.augment);
  c.overfit = kv.get_bool("train.overfit", d.overfit);
  c.deterministic = kv.get_bool("train.deterministic", d.deterministic);
  c.seed = static_cast<std::uint64_t>(kv.get_int("train.seed", static_cast<long long>(d.seed)));
  if (kv.has("train.exclusions")) c.exclusions = rects_from_string(*kv.get("train.exclusions"));
  return c;
}

KvConfig TrainConfig::to_kv() const {
  KvConfig kv;
  kv.set("train.base_lr", format_double(base_lr));
  kv.set("train.cycle_amplitude", format_double(cycle_amplitude));
  kv.set("train.cycle_length", std::to_string(cycle_length));
  kv.set("train.beta1", format_double(beta1));
  kv.set("train.beta2", format_double(beta2));
  kv.set("train.weight_decay", format_double(weight_decay));
  kv.set("train.accumulation", std::to_string(accumulation));
  kv.set("train.batch", std::to_string(batch));
  kv.set("train.queries_per_patch", std::to_string(queries_per_patch));
  kv.set("train.max_steps", std::to_string(max_steps));
  kv.set("train.eval_every", std::to_string(eval_every));
  kv.set("train.patience", std::to_string(patience));
  kv.set("train.min_improvement", format_double(min_improvement));
  kv.set("train.window", format_double(window));
  kv.set("train.augment", augment ? "true" : "false");
  kv.set("train.overfit", overfit ? "true" : "false");
  kv.set("train.deterministic", deterministic ? "true" : "false");
  kv.set("train.seed", std::to_string(seed));
  if (!exclusions.empty()) kv.set("train.exclusions", rects_to_string(exclusions));
  return kv;
}

PatchBundle make_training_patch(const TrainData& data, const PointIndex& index, const ModelConfig& cfg,
                                const Rect& window, std::size_t queries, const std::vector<Rect>& exclusions,
                                std::uint64_t seed) {
  const WindowInputs in = prepare_window(index, data.views, window, cfg);
  const QuerySet q = sample_training_queries(*data.scene, in.window, queries, data.sampler, seed);
  PatchBundle b;
  b.points = in.points;
  b.images = in.images;
  b.image_res = cfg.image_res();
  b.queries = normalized_queries(q.points, in.window);
  b.labels = q.occupancy;
  b.weights = q.weight;
  for (std::size_t i = 0; i < q.size(); ++i)
    for (const Rect& x : exclusions)
      if (x.contains(q.points[i].x, q.points[i].y)) b.weights[i] = 0.0;
  return b;
}

template <class T>
double patch_loss(nn::ParamSet<T>& params, const ModelConfig& cfg, const PatchBundle& patch, double scale,
                  bool backward) {
  nn::Tape<T> tape(backward);
  const nn::Var psi = build_shape_plane(tape, params, cfg, nn::Mat<T>(patch.points.template cast<T>()));
  const nn::Var xi = cfg.variant == Variant::Zero
                         ? nn::Var{}
                         : build_image_plane(tape, params, cfg, nn::Mat<T>(patch.images.template cast<T>()));
  const nn::Var logits = build_decoder(tape, params, cfg, psi, xi, nn::Mat<T>(patch.queries.template cast<T>()));
  const nn::Var loss = tape.bce_logits(logits, patch.labels, patch.weights, scale);
  if (backward) tape.backward(loss);
  return static_cast<double>(tape.value(loss)(0, 0));
}

template double patch_loss<float>(nn::ParamSet<float>&, const ModelConfig&, const PatchBundle&, double, bool);
template double patch_loss<double>(nn::ParamSet<double>&, const ModelConfig&, const PatchBundle&, double, bool);

double accumulate_gradients(ModelParams& params, const ModelConfig& cfg, const std::vector<PatchBundle>& patches) {
  double wsum = 0.0;
  for (const auto& p : patches)
    for (const double w : p.weights) wsum += w;
  if (!(wsum > 0)) throw InvalidArgument("all training queries of the step have zero weight");
  const double scale = 1.0 / wsum;

  // At most 8 fixed chunks, each with a private gradient buffer, summed in chunk order.
  const std::size_t n = patches.size();
  const std::size_t grain = (n + 7) / 8;
  const std::size_t chunks = (n + grain - 1) / grain;
  std::vector<ModelParams> local(chunks, params);
  std::vector<double> loss(chunks, 0.0);
  parallel_for(n, grain, [&](std::size_t b, std::size_t e) {
    const std::size_t c = b / grain;
    local[c].zero_grad();
    for (std::size_t i = b; i < e; ++i) loss[c] += patch_loss(local[c], cfg, patches[i], scale, true);
  });
  params.zero_grad();
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total += loss[c];
    for (std::size_t k = 0; k < params.all().size(); ++k) params.all()[k].grad += local[c].all()[k].grad;
  }
  return total;
}

MetricsReport score_region(const RasterGrid& dsm, const ReferenceProducts& ref, const Rect& region) {
  const RasterGrid r = ref.dsm.crop(region);
  const RasterGrid b = ref.building_mask.crop(region);
  const RasterGrid f = ref.forest_mask.crop(region);
  const RasterGrid p = dsm.spec() == r.spec() ? dsm : dsm.crop(region);
  MetricMasks m;
  m.building = &b;
  m.forest = &f;
  m.provenance = "reference footprints (buildings dilated 2 px), reference forest polygons";
  return compute_metrics(p, r, m);
}

RegionEvaluation evaluate_region(const OccupancyNetwork& net, const TrainData& data, const Rect& region,
                                 const ExtractionConfig& cfg) {
  NetworkField field(net, *data.cloud, data.views, data.ref->dsm.spec().extent());
  RegionEvaluation ev;
  ev.dsm = extract_dsm(field, region, cfg);
  ev.report = score_region(ev.dsm, *data.ref, region);
  return ev;
}

TrainResult train_model(const TrainData& data, const TrainConfig& cfg, const ModelConfig& model,
                        const std::function<void(const TrainLogRow&)>& on_row) {
  cfg.validate();
  model.validate();
  if (!data.scene || !data.cloud || !data.ref) throw InvalidArgument("training data is incomplete");
  const PointIndex index(*data.cloud);
  const Rect tb = data.split.train_bounds;
  if (tb.width() < cfg.window || tb.height() < cfg.window) throw InvalidArgument("training region smaller than a window");

  ModelParams params = init_params<float>(model, model.init_seed);
  Adam adam(cfg.beta1, cfg.beta2, 1e-8, cfg.weight_decay);
  Rng rng(sub_seed(cfg.seed, 100));
  const double snap = 0.25;
  auto random_window = [&] {
    const double x = tb.x0 + std::floor(uniform(rng, 0.0, tb.width() - cfg.window) / snap) * snap;
    const double y = tb.y0 + std::floor(uniform(rng, 0.0, tb.height() - cfg.window) / snap) * snap;
    return Rect{x, y, x + cfg.window, y + cfg.window};
  };

  std::vector<PatchBundle> fixed;
  if (cfg.overfit) {
    const double x = tb.x0 + std::floor((tb.width() - cfg.window) / 2 / snap) * snap;
    const double y = tb.y0 + std::floor((tb.height() - cfg.window) / 2 / snap) * snap;
    fixed.push_back(make_training_patch(data, index, model, {x, y, x + cfg.window, y + cfg.window},
                                        static_cast<std::size_t>(cfg.queries_per_patch), cfg.exclusions,
                                        sub_seed(cfg.seed, 200)));
  }

  TrainResult res;
  res.params = params;
  double patience_ref = std::numeric_limits<double>::infinity();
  int stale = 0;
  long window_counter = 0;
  const std::size_t W = static_cast<std::size_t>(cfg.windows_per_step());
  for (long step = 1; step <= cfg.max_steps; ++step) {
    const double lr = cyclical_lr(step - 1, cfg.base_lr, cfg.cycle_amplitude, cfg.cycle_length);
    std::vector<PatchBundle> patches(W);
    if (cfg.overfit) {
      std::fill(patches.begin(), patches.end(), fixed[0]);
    } else {
      // Draw every random choice up front so preparation can run in parallel.
      std::vector<Rect> wins(W);
      std::vector<WindowTransform> tf(W);
      std::vector<std::uint64_t> seeds(W);
      for (std::size_t k = 0; k < W; ++k) {
        wins[k] = random_window();
        if (cfg.augment) {
          tf[k].quarter_turns = static_cast<int>(rng() % 4);
          tf[k].flip_x = rng() % 2;
          tf[k].flip_y = rng() % 2;
        }
        seeds[k] = sub_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(window_counter++));
      }
      parallel_for(W, 1, [&](std::size_t b, std::size_t e) {
        for (std::size_t k = b; k < e; ++k)
          patches[k] = augment_patch(make_training_patch(data, index, model, wins[k],
                                                         static_cast<std::size_t>(cfg.queries_per_patch),
                                                         cfg.exclusions, seeds[k]),
                                     tf[k]);
      });
    }
    const double loss = accumulate_gradients(params, model, patches);
    if (!std::isfinite(loss)) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "non-finite training loss at step %ld (lr %.3g); last finite row is step %ld", step,
                    lr, res.log.empty() ? 0L : res.log.back().step);
      throw NumericError(buf);
    }
    adam.step(params, lr);

    TrainLogRow row;
    row.step = step;
    row.lr = lr;
    row.train_loss = loss;
    const bool eval = cfg.eval_every > 0 && (step % cfg.eval_every == 0 || step == cfg.max_steps);
    if (eval) {
      ModelConfig mc = model;
      const OccupancyNetwork net(mc, params);
      const RegionEvaluation ev = evaluate_region(net, data, data.split.val, data.val_extraction);
      const auto& o = ev.report[MetricClass::Overall];
      row.val_mae = o.mae;
      row.val_rmse = o.rmse;
      row.val_medae = o.medae;
      if (!(res.best_val_mae <= o.mae)) {  // also true while best is NaN
        res.best_val_mae = o.mae;
        res.best_step = step;
        res.params = params;
      }
      if (o.mae < patience_ref * (1.0 - cfg.min_improvement)) {
        patience_ref = o.mae;
        stale = 0;
      } else {
        ++stale;
      }
    }
    res.log.push_back(row);
    if (on_row) on_row(row);
    if (eval && stale >= cfg.patience) {
      res.early_stopped = true;
      break;
    }
  }
  if (cfg.eval_every == 0) {
    res.params = params;
    res.best_step = res.log.back().step;
  }
  return res;
}

void write_train_log(const std::vector<TrainLogRow>& log, std::ostream& out) {
  out << "step,lr,train_loss,val_mae,val_rmse,val_medae\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof buf, "%ld,%.9g,%.9g", r.step, r.lr, r.train_loss);
    out << buf;
    for (const double v : {r.val_mae, r.val_rmse, r.val_medae}) {
      out << ',';
      if (std::isfinite(v)) {
        std::snprintf(buf, sizeof buf, "%.9g", v);
        out << buf;
      }
    }
    out << '\n';
  }
}

void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path.string());
  write_train_log(log, f);
  if (!f) throw InvalidArgument("failed writing " + path.string());
}

}  // namespace implicity
