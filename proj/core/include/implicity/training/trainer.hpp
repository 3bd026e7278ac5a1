// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <vector>

#include "implicity/eval/metrics.hpp"
#include "implicity/extraction/extract.hpp"
#include "implicity/model/occupancy_model.hpp"
#include "implicity/sampler/queries.hpp"
#include "implicity/sensor/point_cloud.hpp"
#include "implicity/scene/render.hpp"
#include "implicity/training/augment.hpp"
#include "implicity/training/dataset.hpp"

namespace implicity {

struct TrainConfig {
  double base_lr = 5e-5;
  double cycle_amplitude = 5e-4;
  long cycle_length = 4000;  // steps
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;
  int accumulation = 64;     // iterations per optimizer step
  int batch = 1;             // windows per iteration
  int queries_per_patch = 2048;
  long max_steps = 2000;
  long eval_every = 50;      // 0 disables validation
  int patience = 10;         // evals without >min_improvement relative gain before stopping
  double min_improvement = 0.01;
  double window = 64.0;
  bool augment = true;
  bool overfit = false;      // one fixed window and query set, no augmentation
  bool deterministic = true;
  std::uint64_t seed = 0;
  std::vector<Rect> exclusions;  // training queries inside get weight 0

  int windows_per_step() const { return accumulation * batch; }
  void validate() const;
  static TrainConfig from_kv(const KvConfig& kv) { return from_kv(kv, TrainConfig()); }
  static TrainConfig from_kv(const KvConfig& kv, const TrainConfig& defaults);
  KvConfig to_kv() const;
};

/// Everything training reads. Pointers must outlive the call.
struct TrainData {
  const SceneModel* scene = nullptr;
  const PointCloud* cloud = nullptr;
  std::array<const RasterGrid*, 2> views{};
  const ReferenceProducts* ref = nullptr;
  StripSplit split;
  SamplerConfig sampler;
  ExtractionConfig val_extraction;
};

struct TrainLogRow {
  long step = 0;  // 1-based optimizer step
  double lr = 0.0;
  double train_loss = 0.0;
  // NaN on steps without validation.
  double val_mae = std::numeric_limits<double>::quiet_NaN();
  double val_rmse = std::numeric_limits<double>::quiet_NaN();
  double val_medae = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  ModelParams params;  // best validation parameters (final ones when never validated)
  long best_step = 0;
  double best_val_mae = std::numeric_limits<double>::quiet_NaN();
  std::vector<TrainLogRow> log;
  bool early_stopped = false;
};

/// A training window's normalized inputs, oracle-labelled queries and weights.
PatchBundle make_training_patch(const TrainData& data, const PointIndex& index, const ModelConfig& cfg,
                                const Rect& window, std::size_t queries, const std::vector<Rect>& exclusions,
                                std::uint64_t seed);

/// Loss contribution scale * sum_i w_i BCE_i of one patch; accumulates parameter
/// gradients when `backward` is set.
template <class T>
double patch_loss(nn::ParamSet<T>& params, const ModelConfig& cfg, const PatchBundle& patch, double scale,
                  bool backward);

/// One optimizer step's loss and gradient (left in params' grad) over a set of patches,
/// normalized by their total weight. Chunks are fixed by the patch count, so the result
/// does not depend on the thread count.
double accumulate_gradients(ModelParams& params, const ModelConfig& cfg, const std::vector<PatchBundle>& patches);

/// Extracts a DSM over `region` with the network and scores it against the reference.
struct RegionEvaluation {
  RasterGrid dsm;
  MetricsReport report;
};
RegionEvaluation evaluate_region(const OccupancyNetwork& net, const TrainData& data, const Rect& region,
                                 const ExtractionConfig& cfg);
/// Crops the reference products to `region` and scores `dsm` (which must cover it).
MetricsReport score_region(const RasterGrid& dsm, const ReferenceProducts& ref, const Rect& region);

TrainResult train_model(const TrainData& data, const TrainConfig& cfg, const ModelConfig& model,
                        const std::function<void(const TrainLogRow&)>& on_row = {});

/// CSV `step,lr,train_loss,val_mae,val_rmse,val_medae`; validation columns are empty on
/// steps without validation.
void write_train_log(const std::vector<TrainLogRow>& log, std::ostream& out);
void write_train_log(const std::vector<TrainLogRow>& log, const std::filesystem::path& path);

}  // namespace implicity
