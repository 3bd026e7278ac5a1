// SPDX-License-Identifier: Apache-2.0
// Throughput of the hot paths: fusion, extraction, sampling, encoding, decoding, one
// training iteration.
#include <benchmark/benchmark.h>

#include <random>

#include "implicity/common/rng.hpp"
#include "implicity/dsm/fusion.hpp"
#include "implicity/extraction/extract.hpp"
#include "implicity/extraction/fields.hpp"
#include "implicity/model/occupancy_model.hpp"
#include "implicity/sampler/queries.hpp"
#include "implicity/sensor/simulate.hpp"
#include "implicity/training/presets.hpp"
#include "implicity/training/trainer.hpp"

using namespace implicity;

namespace {

const SceneModel& town() {
  static const SceneModel s = generate_scene(42, SceneConfig{});
  return s;
}

const PointCloud& cloud() {
  static const PointCloud pc = simulate_point_cloud(town(), SensorConfig{});
  return pc;
}

PatchBundle synthetic_patch(const ModelConfig& cfg, int points, int queries) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<float> u(0.f, 1.f);
  PatchBundle p;
  p.points.resize(points, 3);
  for (Eigen::Index i = 0; i < p.points.size(); ++i) p.points.data()[i] = u(rng);
  p.image_res = cfg.image_res();
  p.images.resize(cfg.image_channels(), p.image_res * p.image_res);
  for (Eigen::Index i = 0; i < p.images.size(); ++i) p.images.data()[i] = u(rng) - 0.5f;
  p.queries.resize(queries, 3);
  for (Eigen::Index i = 0; i < p.queries.size(); ++i) p.queries.data()[i] = u(rng);
  for (int i = 0; i < queries; ++i) {
    p.labels.push_back(static_cast<std::uint8_t>(i & 1));
    p.weights.push_back(1.0);
  }
  return p;
}

}  // namespace

static void BM_ConventionalDsm(benchmark::State& state) {
  const GridSpec g = GridSpec::covering(town().extent(), 0.25);
  for (auto _ : state) benchmark::DoNotOptimize(conventional_dsm(cloud(), FusionConfig{}, g));
  state.SetItemsProcessed(state.iterations() * static_cast<long>(cloud().size()));
}
BENCHMARK(BM_ConventionalDsm)->Unit(benchmark::kMillisecond);

static void BM_OracleExtraction64m(benchmark::State& state) {
  OracleField field(town());
  const Rect region{96, 96, 160, 160};
  for (auto _ : state) benchmark::DoNotOptimize(extract_dsm(field, region, ExtractionConfig{}));
  state.SetItemsProcessed(state.iterations() * 256 * 256);
}
BENCHMARK(BM_OracleExtraction64m)->Unit(benchmark::kMillisecond);

static void BM_SampleQueries(benchmark::State& state) {
  const PatchWindow w{{64, 64}, 64.0, 0.0, 1.0};
  std::uint64_t seed = 0;
  for (auto _ : state)
    benchmark::DoNotOptimize(sample_training_queries(town(), w, 2048, SamplerConfig{}, ++seed));
  state.SetItemsProcessed(state.iterations() * 2048);
}
BENCHMARK(BM_SampleQueries)->Unit(benchmark::kMicrosecond);

static void BM_EncodeWindow(benchmark::State& state) {
  ModelConfig cfg = desk_model(Variant::Stereo);
  const OccupancyNetwork net(cfg, init_params<float>(cfg, 1));
  const PatchBundle p = synthetic_patch(cfg, 16000, 1);
  for (auto _ : state) benchmark::DoNotOptimize(net.encode(p.points, p.images));
}
BENCHMARK(BM_EncodeWindow)->Unit(benchmark::kMillisecond);

static void BM_Decode(benchmark::State& state) {
  ModelConfig cfg = desk_model(Variant::Stereo);
  const OccupancyNetwork net(cfg, init_params<float>(cfg, 1));
  const PatchBundle p = synthetic_patch(cfg, 16000, static_cast<int>(state.range(0)));
  const auto planes = net.encode(p.points, p.images);
  for (auto _ : state) benchmark::DoNotOptimize(net.decode(planes, p.queries));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Decode)->Arg(2048)->Arg(16384)->Unit(benchmark::kMillisecond);

static void BM_TrainingIteration(benchmark::State& state) {
  ModelConfig cfg = desk_model(Variant::Stereo);
  auto params = init_params<float>(cfg, 1);
  const PatchBundle p = synthetic_patch(cfg, 16000, 2048);
  for (auto _ : state) {
    params.zero_grad();
    benchmark::DoNotOptimize(patch_loss(params, cfg, p, 1.0 / 2048, true));
  }
}
BENCHMARK(BM_TrainingIteration)->Unit(benchmark::kMillisecond);
BENCHMARK_MAIN();
