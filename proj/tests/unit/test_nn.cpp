// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>

#include "implicity/common/error.hpp"
#include "implicity/nn/tape.hpp"

using namespace implicity;
using namespace implicity::nn;
using MatD = Mat<double>;

namespace {

MatD randm(int r, int c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> n(0, scale);
  MatD m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Reduces any node to a scalar through a fixed random projection and a BCE head.
struct Head {
  std::vector<std::uint8_t> labels;
  std::vector<double> weights;
  MatD proj;
};

Var scalar_head(Tape<double>& t, Var v, Head& h, std::mt19937_64& rng) {
  const auto& val = t.value(v);
  if (h.proj.size() == 0) {
    h.proj = randm(static_cast<int>(val.cols()), 1, rng, 0.5);
    std::bernoulli_distribution b(0.5);
    for (Eigen::Index i = 0; i < val.rows(); ++i) {
      h.labels.push_back(b(rng));
      h.weights.push_back(0.5 + 0.5 * (i % 3));
    }
  }
  const Var logits = t.linear(v, t.constant(h.proj), Var{});
  return t.bce_logits(logits, h.labels, h.weights, 1.0 / static_cast<double>(val.rows()));
}

using Builder = std::function<Var(Tape<double>&, ParamSet<double>&)>;

// Largest relative error between reverse-mode and central differences.
double gradcheck(ParamSet<double>& ps, const Builder& f) {
  ps.zero_grad();
  {
    Tape<double> t;
    t.backward(f(t, ps));
  }
  double worst = 0;
  const double h = std::getenv("GRADCHECK_H") ? std::atof(std::getenv("GRADCHECK_H")) : 1e-6;
  for (auto& p : ps.all()) {
    const MatD analytic = p.grad;
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const double keep = p.value.data()[i];
      p.value.data()[i] = keep + h;
      Tape<double> t1(false);
      const double fp = t1.value(f(t1, ps))(0, 0);
      p.value.data()[i] = keep - h;
      Tape<double> t2(false);
      const double fm = t2.value(f(t2, ps))(0, 0);
      p.value.data()[i] = keep;
      const double fd = (fp - fm) / (2 * h);
      const double a = analytic.data()[i];
      const double rel = std::abs(a - fd) / std::max(1e-3, std::abs(a) + std::abs(fd));
      if (rel > 1e-6 && std::getenv("GRADCHECK_VERBOSE"))
        std::printf("%s[%ld] analytic %.10g fd %.10g\n", p.name.c_str(), static_cast<long>(i), a, fd);
      worst = std::max(worst, rel);
    }
  }
  return worst;
}

}  // namespace

TEST(Tape, LinearReluAddConcatGradients) {
  std::mt19937_64 rng(1);
  ParamSet<double> ps;
  ps.add("x", randm(7, 3, rng));
  ps.add("w", randm(3, 4, rng));
  ps.add("b", randm(1, 4, rng));
  ps.add("y", randm(7, 2, rng));
  Head head;
  const Builder f = [&](Tape<double>& t, ParamSet<double>& p) {
    Var a = t.relu(t.linear(t.param(p["x"]), t.param(p["w"]), t.param(p["b"])));
    a = t.add(a, t.linear(t.param(p["x"]), t.param(p["w"]), Var{}));
    return scalar_head(t, t.concat_cols(a, t.param(p["y"])), head, rng);
  };
  EXPECT_LT(gradcheck(ps, f), 1e-6);
}

TEST(Tape, ConvPoolUpsampleGradients) {
  std::mt19937_64 rng(2);
  ParamSet<double> ps;
  ps.add("x", randm(2, 8 * 8, rng));
  ps.add("k3", randm(3, 2 * 9, rng, 0.4));
  ps.add("b3", randm(3, 1, rng));
  ps.add("k3s", randm(2, 3 * 9, rng, 0.4));
  ps.add("k1", randm(2, 8, rng));
  Head head;
  const Builder f = [&](Tape<double>& t, ParamSet<double>& p) {
    // Params carry no plane size, so route the input through a zero plane.
    const Var x = t.add(t.constant(MatD::Zero(2, 64), 8, 8), t.param(p["x"]));
    Var a = t.conv2d(x, t.param(p["k3"]), t.param(p["b3"]), 3, 1);
    Var down = t.conv2d(a, t.param(p["k3s"]), Var{}, 3, 2);  // 4x4
    Var pooled = t.maxpool2(a);                              // 4x4
    Var up = t.upsample2(t.concat_channels(down, pooled));   // 8x8
    const Var out = t.conv2d(t.concat_channels(up, a), t.param(p["k1"]), Var{}, 1, 1);
    return scalar_head(t, out, head, rng);
  };
  EXPECT_LT(gradcheck(ps, f), 1e-6);
}

TEST(Tape, ScatterCellMaxBilinearGradients) {
  std::mt19937_64 rng(3);
  ParamSet<double> ps;
  ps.add("pts", randm(20, 3, rng));
  ps.add("plane", randm(3, 4 * 4, rng));
  std::vector<std::int32_t> cell(20);
  for (int i = 0; i < 20; ++i) cell[i] = (i * 7) % 11;
  MatD xy(9, 2);
  std::uniform_real_distribution<double> u(-0.1, 1.1);
  for (Eigen::Index i = 0; i < xy.size(); ++i) xy.data()[i] = u(rng);
  Head head;
  const Builder f = [&](Tape<double>& t, ParamSet<double>& p) {
    const Var pts = t.param(p["pts"]);
    const Var pooled = t.cell_max(pts, cell, 16);
    const Var plane = t.scatter_mean(t.concat_cols(pts, pooled), cell, 4, 4);
    const Var both = t.concat_channels(plane, t.constant(MatD::Zero(3, 16), 4, 4));
    const Var extra = t.concat_channels(t.concat_channels(t.param(p["plane"]), t.param(p["plane"])), t.param(p["plane"]));
    const Var sampled = t.bilinear(t.add(both, extra), xy);
    return scalar_head(t, sampled, head, rng);
  };
  EXPECT_LT(gradcheck(ps, f), 1e-6);
}

TEST(Tape, ConvMatchesNaiveLoop) {
  std::mt19937_64 rng(4);
  const int C = 2, O = 3, H = 5, W = 6, k = 3;
  for (int stride : {1, 2}) {
    const MatD x = randm(C, H * W, rng), K = randm(O, C * k * k, rng), b = randm(O, 1, rng);
    Tape<double> t(false);
    const Var y = t.conv2d(t.constant(x, H, W), t.constant(K), t.constant(b), k, stride);
    const int Ho = (H - 1) / stride + 1, Wo = (W - 1) / stride + 1;
    ASSERT_EQ(t.height(y), Ho);
    ASSERT_EQ(t.width(y), Wo);
    for (int o = 0; o < O; ++o)
      for (int oy = 0; oy < Ho; ++oy)
        for (int ox = 0; ox < Wo; ++ox) {
          double s = b(o, 0);
          for (int c = 0; c < C; ++c)
            for (int ky = 0; ky < k; ++ky)
              for (int kx = 0; kx < k; ++kx) {
                const int iy = oy * stride + ky - 1, ix = ox * stride + kx - 1;
                if (iy < 0 || ix < 0 || iy >= H || ix >= W) continue;
                s += K(o, (c * k + ky) * k + kx) * x(c, iy * W + ix);
              }
          ASSERT_NEAR(t.value(y)(o, oy * Wo + ox), s, 1e-12);
        }
  }
}

TEST(Tape, BilinearHitsCellCentersAndClamps) {
  MatD plane(1, 4);
  plane << 1, 2, 3, 4;  // 2x2, row 0 first
  MatD xy(4, 2);
  xy << 0.25, 0.25, 0.75, 0.25, 0.5, 0.5, -3, 9;
  Tape<double> t(false);
  const Var v = t.bilinear(t.constant(plane, 2, 2), xy);
  EXPECT_DOUBLE_EQ(t.value(v)(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t.value(v)(1, 0), 2.0);
  EXPECT_DOUBLE_EQ(t.value(v)(2, 0), 2.5);
  EXPECT_DOUBLE_EQ(t.value(v)(3, 0), 3.0);
}

TEST(Tape, BceMatchesClosedForm) {
  MatD logits(3, 1);
  logits << -2.0, 0.5, 40.0;
  const std::vector<std::uint8_t> o{0, 1, 0};
  const std::vector<double> w{1.0, 2.0, 0.5};
  Tape<double> t(false);
  const double got = t.value(t.bce_logits(t.constant(logits), o, w, 0.25))(0, 0);
  auto sig = [](double z) { return 1 / (1 + std::exp(-z)); };
  const double eps = 1e-7;
  double want = 1.0 * -std::log(1 - sig(-2.0)) + 2.0 * -std::log(sig(0.5)) + 0.5 * -std::log(eps);
  EXPECT_NEAR(got, 0.25 * want, 1e-9);
}

TEST(Tape, ShapeErrorsThrow) {
  Tape<double> t(false);
  const Var p = t.constant(MatD::Zero(2, 9), 3, 3);
  EXPECT_THROW(t.maxpool2(p), InvalidArgument);
  EXPECT_THROW(t.conv2d(p, t.constant(MatD::Zero(1, 9)), Var{}, 3, 1), InvalidArgument);
  const std::vector<std::int32_t> bad{0, 5};
  EXPECT_THROW(t.cell_max(t.constant(MatD::Zero(2, 1)), bad, 3), InvalidArgument);
}

TEST(ParamSet, CastAndLookup) {
  ParamSet<double> ps;
  ps.add("a", MatD::Constant(2, 2, 0.1));
  const auto f = ps.cast<float>();
  EXPECT_TRUE(f.contains("a"));
  EXPECT_FALSE(f.contains("b"));
  EXPECT_FLOAT_EQ(f["a"].value(1, 1), 0.1f);
  EXPECT_EQ(ps.scalar_count(), 4u);
}
