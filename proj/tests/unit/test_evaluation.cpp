// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "implicity/common/error.hpp"
#include "implicity/eval/metrics.hpp"

using namespace implicity;

namespace {

struct Naive {
  double mae = 0, rmse = 0, medae = 0;
  std::size_t n = 0;
};

Naive naive(const std::vector<double>& e) {
  Naive r;
  r.n = e.size();
  if (e.empty()) return r;
  std::vector<double> a;
  for (double v : e) {
    r.mae += std::abs(v);
    r.rmse += v * v;
    a.push_back(std::abs(v));
  }
  r.mae /= e.size();
  r.rmse = std::sqrt(r.rmse / e.size());
  std::sort(a.begin(), a.end());
  r.medae = a[(a.size() - 1) / 2];
  return r;
}

bool near_building(const RasterGrid& b, int r, int c, int k) {
  for (int i = r - k; i <= r + k; ++i)
    for (int j = c - k; j <= c + k; ++j)
      if (b.in_bounds(i, j) && b.valid(i, j) && b.at(i, j) != 0) return true;
  return false;
}

}  // namespace

TEST(Metrics, MatchNaiveOracleOnRandomRasters) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> n(0, 1.5);
  std::uniform_real_distribution<double> u(0, 1);
  for (int trial = 0; trial < 20; ++trial) {
    const GridSpec g{100.0, 200.0, 0.5, 30 + trial, 41};
    RasterGrid pred(g), ref(g), bld(g), forest(g);
    for (std::size_t i = 0; i < g.size(); ++i) {
      ref.values()[i] = 50 + 10 * u(rng);
      pred.values()[i] = u(rng) < 0.05 ? pred.nodata() : ref.values()[i] + n(rng);
      bld.values()[i] = u(rng) < 0.08 ? 1 : 0;
      forest.values()[i] = u(rng) < 0.2 ? 1 : 0;
    }
    MetricMasks m;
    m.building = &bld;
    m.forest = &forest;
    m.exclusions = {Rect{101, 202, 104.9, 207.1}};
    const auto rep = compute_metrics(pred, ref, m);

    std::vector<double> all, b, t, tnf;
    std::size_t excluded = 0;
    for (int r = 0; r < g.rows; ++r)
      for (int c = 0; c < g.cols; ++c) {
        const double x = g.x0 + (c + 0.5) * g.cell_size, y = g.y0 + (r + 0.5) * g.cell_size;
        if (x >= 101 && x <= 104.9 && y >= 202 && y <= 207.1) {
          ++excluded;
          continue;
        }
        if (!pred.valid(r, c)) continue;
        const double e = pred.at(r, c) - ref.at(r, c);
        all.push_back(e);
        if (near_building(bld, r, c, 2)) b.push_back(e);
        if (bld.at(r, c) == 0) {
          t.push_back(e);
          if (forest.at(r, c) == 0) tnf.push_back(e);
        }
      }
    EXPECT_EQ(rep.excluded_pixels, excluded);
    EXPECT_NEAR(rep.excluded_area, excluded * 0.25, 1e-12);
    const std::vector<double>* lists[4] = {&all, &b, &t, &tnf};
    for (std::size_t k = 0; k < 4; ++k) {
      const Naive want = naive(*lists[k]);
      const auto& got = rep.classes[k];
      ASSERT_EQ(got.count, want.n) << to_string(kMetricClasses[k]);
      EXPECT_NEAR(got.mae, want.mae, 1e-9);
      EXPECT_NEAR(got.rmse, want.rmse, 1e-9);
      EXPECT_NEAR(got.medae, want.medae, 1e-9);
      EXPECT_LE(got.mae, got.rmse);
    }
  }
}

TEST(Metrics, DilationIsASquareElement) {
  RasterGrid m(GridSpec{0, 0, 1, 9, 9});
  m.at(4, 4) = 1;
  const RasterGrid d = dilate_mask(m, 2);
  for (int r = 0; r < 9; ++r)
    for (int c = 0; c < 9; ++c)
      EXPECT_EQ(d.at(r, c) != 0, std::abs(r - 4) <= 2 && std::abs(c - 4) <= 2) << r << "," << c;
}

TEST(Metrics, MissingMasksMakeBuildingsAbsent) {
  RasterGrid a(GridSpec{0, 0, 1, 4, 4}, 1.0), b(GridSpec{0, 0, 1, 4, 4}, 0.0);
  const auto rep = compute_metrics(a, b, MetricMasks{});
  EXPECT_FALSE(rep[MetricClass::Buildings].present);
  EXPECT_TRUE(rep[MetricClass::Terrain].present);
  EXPECT_DOUBLE_EQ(rep[MetricClass::Terrain].mae, rep[MetricClass::Overall].mae);
  const std::string js = report_to_json(rep);
  EXPECT_NE(js.find("\"absent\": true"), std::string::npos);
  EXPECT_NE(js.find("\"overall\""), std::string::npos);
}

TEST(Metrics, GridMismatchNamesBothGrids) {
  RasterGrid a(GridSpec{0, 0, 1, 4, 4}), b(GridSpec{0, 0, 1, 4, 5});
  try {
    compute_metrics(a, b, MetricMasks{});
    FAIL();
  } catch (const InvalidArgument& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find(a.spec().describe()), std::string::npos) << msg;
    EXPECT_NE(msg.find(b.spec().describe()), std::string::npos) << msg;
  }
}

TEST(Metrics, SummaryOfKnownErrors) {
  const auto s = summarize_errors({3, -4, 0, 1});
  EXPECT_DOUBLE_EQ(s.mae, 2.0);
  EXPECT_DOUBLE_EQ(s.rmse, std::sqrt(26.0 / 4));
  EXPECT_DOUBLE_EQ(s.medae, 1.0);
  EXPECT_EQ(s.count, 4u);
  EXPECT_FALSE(summarize_errors({}).present);
}

TEST(Metrics, ErrorMapPropagatesNodata) {
  RasterGrid a(GridSpec{0, 0, 1, 1, 2}, 5.0), b(GridSpec{0, 0, 1, 1, 2}, 2.0);
  a.at(0, 1) = a.nodata();
  const RasterGrid e = error_map(a, b);
  EXPECT_DOUBLE_EQ(e.at(0, 0), 3.0);
  EXPECT_FALSE(e.valid(0, 1));
}
