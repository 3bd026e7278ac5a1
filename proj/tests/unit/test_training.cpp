// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "../support/bce_oracle.hpp"
#include "../support/gradcheck.hpp"
#include "implicity/common/error.hpp"
#include "implicity/training/augment.hpp"
#include "implicity/training/dataset.hpp"
#include "implicity/training/loss.hpp"
#include "implicity/training/optim.hpp"
#include "implicity/training/trainer.hpp"

using namespace implicity;
namespace it = implicity::testing;

TEST(Loss, MatchesHighPrecisionOracle) {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 1 + rng() % 300;
    std::vector<double> p(n), o(n), w(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double r = u(rng);
      p[i] = r < 0.05 ? 0.0 : r < 0.1 ? 1.0 : r < 0.15 ? 1e-12 : r < 0.2 ? 1 - 1e-12 : u(rng);
      o[i] = u(rng) < 0.8 ? std::round(u(rng)) : u(rng);
      w[i] = u(rng) < 0.1 ? 0.0 : 0.1 + u(rng);
    }
    w[0] = 1.0;
    EXPECT_NEAR(bce_loss(p, o, w), it::bce_mpfr(p, o, w), 1e-9) << "trial " << trial;
  }
}

TEST(Loss, RejectsBadInputs) {
  const std::vector<double> p{0.5, 0.5}, o{1, 0};
  EXPECT_THROW(bce_loss(p, o, std::vector<double>{1.0}), InvalidArgument);
  EXPECT_THROW(bce_loss(p, o, std::vector<double>{1.0, -1.0}), InvalidArgument);
  EXPECT_THROW(bce_loss(p, o, std::vector<double>{0.0, 0.0}), InvalidArgument);
  EXPECT_NEAR(bce_loss(p, o, std::vector<double>{1, 1}), std::log(2.0), 1e-15);
}

TEST(Loss, TapeHeadAgreesWithStandaloneLoss) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0, 3);
  nn::Mat<double> logits(50, 1);
  std::vector<std::uint8_t> lab(50);
  std::vector<double> w(50), p(50), o(50);
  double wsum = 0;
  for (int i = 0; i < 50; ++i) {
    logits(i, 0) = n(rng);
    lab[i] = i % 2;
    w[i] = 0.5 + (i % 4);
    wsum += w[i];
    p[i] = 1 / (1 + std::exp(-logits(i, 0)));
    o[i] = lab[i];
  }
  nn::Tape<double> t(false);
  const double tape = t.value(t.bce_logits(t.constant(logits), lab, w, 1.0 / wsum))(0, 0);
  EXPECT_NEAR(tape, bce_loss(p, o, w), 1e-9);
}

TEST(Optim, CyclicalScheduleShape) {
  EXPECT_DOUBLE_EQ(cyclical_lr(0, 5e-5, 5e-4, 4000), 5e-5);
  EXPECT_DOUBLE_EQ(cyclical_lr(2000, 5e-5, 5e-4, 4000), 5.5e-4);
  EXPECT_DOUBLE_EQ(cyclical_lr(4000, 5e-5, 5e-4, 4000), 5e-5);
  EXPECT_DOUBLE_EQ(cyclical_lr(1000, 5e-5, 5e-4, 4000), 5e-5 + 2.5e-4);
  EXPECT_DOUBLE_EQ(cyclical_lr(5000, 5e-5, 5e-4, 4000), cyclical_lr(1000, 5e-5, 5e-4, 4000));
  EXPECT_THROW(cyclical_lr(-1, 1, 1, 10), InvalidArgument);
}

TEST(Optim, AdamFirstStepMovesByLrAgainstTheGradient) {
  nn::ParamSet<float> ps;
  auto& p = ps.add("w", nn::Mat<float>::Zero(1, 3));
  p.grad.resize(1, 3);
  p.grad << 2.0f, -0.5f, 0.0f;
  Adam adam(0.9, 0.999);
  adam.step(ps, 0.01);
  EXPECT_NEAR(ps["w"].value(0, 0), -0.01f, 1e-6);
  EXPECT_NEAR(ps["w"].value(0, 1), 0.01f, 1e-6);
  EXPECT_EQ(ps["w"].value(0, 2), 0.0f);
  EXPECT_EQ(adam.steps(), 1);
}

TEST(Augment, TransformInverts) {
  for (int deg : {0, 90, 180, 270})
    for (bool fx : {false, true})
      for (bool fy : {false, true}) {
        const auto t = WindowTransform::from_degrees(deg, fx, fy);
        const Vec2 p{0.2, 0.7};
        const Vec2 q = t.invert(t.apply(p));
        EXPECT_NEAR(q.x, p.x, 1e-15);
        EXPECT_NEAR(q.y, p.y, 1e-15);
      }
  const auto r = WindowTransform::from_degrees(90, false, false).apply({1.0, 0.0});
  EXPECT_NEAR(r.x, 1.0, 1e-15);  // (1,0) turns to (1,1) about the center
  EXPECT_NEAR(r.y, 1.0, 1e-15);
  EXPECT_THROW(WindowTransform::from_degrees(45, false, false), InvalidArgument);
}

TEST(Augment, ImagesMoveWithTheGeometry) {
  const ModelConfig c = ModelConfig::tiny(Variant::Stereo);
  PatchBundle b = it::random_patch(c, 16, 40, 3);
  const int S = b.image_res;
  // Put every query on a pixel center so the pixel under it is well defined.
  for (int i = 0; i < 40; ++i) {
    const int px = (i * 7) % S, py = (i * 13) % S;
    b.queries(i, 0) = (px + 0.5f) / S;
    b.queries(i, 1) = (py + 0.5f) / S;
  }
  auto pixel = [S](const PatchBundle& x, int ch, float qx, float qy) {
    const int col = static_cast<int>(qx * S), row = static_cast<int>(qy * S);
    return x.images(ch, row * S + col);
  };
  for (int deg : {90, 180, 270})
    for (bool fx : {false, true}) {
      const PatchBundle a = augment_patch(b, deg, fx, !fx);
      for (int i = 0; i < 40; ++i) {
        for (int ch = 0; ch < 2; ++ch)
          ASSERT_EQ(pixel(a, ch, a.queries(i, 0), a.queries(i, 1)), pixel(b, ch, b.queries(i, 0), b.queries(i, 1)));
        ASSERT_EQ(a.queries(i, 2), b.queries(i, 2));
        ASSERT_EQ(a.labels[i], b.labels[i]);
      }
    }
}

TEST(Dataset, StripsTileTheExtentOnTheRasterLattice) {
  const auto s = strip_split(Rect{0, 0, 256, 256});
  ASSERT_EQ(s.train.size(), 3u);
  EXPECT_DOUBLE_EQ(s.train_bounds.x0, 0.0);
  EXPECT_DOUBLE_EQ(s.train_bounds.x1, s.val.x0);
  EXPECT_DOUBLE_EQ(s.val.x1, s.test.x0);
  EXPECT_DOUBLE_EQ(s.test.x1, 256.0);
  for (const Rect& r : {s.val, s.test, s.train_bounds}) EXPECT_DOUBLE_EQ(std::fmod(r.x0, 0.25), 0.0);
  EXPECT_THROW(strip_split(Rect{0, 0, 256, 256}, 5, 1, 4), InvalidArgument);  // training strips not contiguous
}

TEST(Training, LogCsvLeavesValidationBlankWhenNotEvaluated) {
  std::vector<TrainLogRow> log(2);
  log[0].step = 1;
  log[0].lr = 1e-3;
  log[0].train_loss = 0.5;
  log[1].step = 2;
  log[1].val_mae = 0.25;
  log[1].val_rmse = 0.5;
  log[1].val_medae = 0.125;
  std::ostringstream out;
  write_train_log(log, out);
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, s.find('\n')), "step,lr,train_loss,val_mae,val_rmse,val_medae");
  EXPECT_NE(s.find("\n1,0.001,0.5,,,\n"), std::string::npos) << s;
}

TEST(Training, GradientAccumulationIsNormalizedAndOrderIndependentOfThreads) {
  const ModelConfig c = ModelConfig::tiny(Variant::Zero);
  auto params = it::perturbed_params(c, 2, 0.2).cast<float>();
  std::vector<PatchBundle> patches;
  for (int i = 0; i < 5; ++i) patches.push_back(it::random_patch(c, 16, 12, 100 + i));
  const double loss = accumulate_gradients(params, c, patches);
  const auto g1 = params["dec.out.W"].grad;
  const double again = accumulate_gradients(params, c, patches);
  EXPECT_EQ(loss, again);
  EXPECT_TRUE(g1 == params["dec.out.W"].grad);

  // Loss normalized by the total weight: the mean over patches of the per-patch sum.
  double wsum = 0, direct = 0;
  for (const auto& p : patches)
    for (double w : p.weights) wsum += w;
  auto copy = params;
  for (const auto& p : patches) direct += patch_loss(copy, c, p, 1.0 / wsum, false);
  EXPECT_NEAR(loss, direct, 1e-6);
}

TEST(Training, OverfitsASingleWindow) {
  SceneBundleConfig sbc;
  sbc.scene.width = 128;
  sbc.scene.height = 128;
  const SceneBundle bundle = build_scene_bundle(3, sbc);
  ModelConfig mc = ModelConfig::tiny(Variant::Stereo);
  fit_normalization(mc, bundle.conventional, bundle.views(), bundle.scene.extent(), 3);
  TrainData data;
  data.scene = &bundle.scene;
  data.cloud = &bundle.cloud;
  data.views = bundle.views();
  data.ref = &bundle.ref;
  data.split = strip_split(bundle.scene.extent());
  TrainConfig tc;
  tc.overfit = true;
  tc.accumulation = 1;
  tc.base_lr = 1e-2;
  tc.cycle_amplitude = 0;
  tc.max_steps = 200;
  tc.eval_every = 0;
  tc.queries_per_patch = 512;
  tc.window = 32;
  const TrainResult r = train_model(data, tc, mc);
  ASSERT_EQ(r.log.size(), 200u);
  double first = 0, last = 0;
  for (int i = 0; i < 5; ++i) {
    first += r.log[i].train_loss;
    last += r.log[195 + i].train_loss;
  }
  EXPECT_LT(last, 0.7 * first);
  for (const auto& row : r.log) EXPECT_TRUE(std::isnan(row.val_mae));
}
