// SPDX-License-Identifier: Apache-2.0
#include "implicity/geometry/z_scale.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "implicity/common/error.hpp"
#include "implicity/common/rng.hpp"

namespace implicity {

double robust_mean_std(std::span<const double> patch_stds) {
  if (patch_stds.size() < kMinUsablePatches)
    throw InvalidArgument("z-scale needs at least 100 usable patches, got " +
                          std::to_string(patch_stds.size()));
  std::vector<double> v(patch_stds.begin(), patch_stds.end());
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  const std::size_t lo = static_cast<std::size_t>(std::floor(0.05 * static_cast<double>(n - 1)));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n - 1)));
  const double p5 = v[lo];
  const double p95 = v[hi];
  double sum = 0.0;
  std::size_t kept = 0;
  for (double s : v) {
    if (s < p5 || s > p95) continue;
    sum += s;
    ++kept;
  }
  const double scale = sum / static_cast<double>(kept);
  if (!(scale >= kMinZScale))
    throw NumericError("degenerate z-scale (" + std::to_string(scale) + " m): training region is flat");
  return scale;
}

double compute_global_z_scale(const RasterGrid& heights, const Rect& region, std::size_t n_patches,
                              double patch_side, std::uint64_t seed) {
  const auto& spec = heights.spec();
  const int k = static_cast<int>(std::lround(patch_side / spec.cell_size));
  if (k < 2) throw InvalidArgument("patch side must span at least two cells");

  // Integral images of valid count, sum and sum of squares.
  const int R = spec.rows, C = spec.cols;
  const std::size_t stride = static_cast<std::size_t>(C) + 1;
  std::vector<double> s1((R + 1) * stride, 0.0), s2((R + 1) * stride, 0.0), sn((R + 1) * stride, 0.0);
  for (int i = 0; i < R; ++i) {
    double a1 = 0, a2 = 0, an = 0;
    for (int j = 0; j < C; ++j) {
      if (heights.valid(i, j)) {
        const double z = heights.at(i, j);
        a1 += z;
        a2 += z * z;
        an += 1;
      }
      const std::size_t o = (i + 1) * stride + j + 1;
      s1[o] = s1[o - stride] + a1;
      s2[o] = s2[o - stride] + a2;
      sn[o] = sn[o - stride] + an;
    }
  }
  auto box = [&](const std::vector<double>& s, int r0, int c0) {
    const int r1 = r0 + k, c1 = c0 + k;
    return s[r1 * stride + c1] - s[r0 * stride + c1] - s[r1 * stride + c0] + s[r0 * stride + c0];
  };

  const auto [rmin, cmin] = heights.world_to_cell(region.x0 + 1e-9, region.y0 + 1e-9);
  const auto [rlim, clim] = heights.world_to_cell(region.x1 - 1e-9, region.y1 - 1e-9);
  const int r_first = std::max(rmin, 0), c_first = std::max(cmin, 0);
  const int r_last = std::min(rlim, R - 1) - k + 1, c_last = std::min(clim, C - 1) - k + 1;
  if (r_last < r_first || c_last < c_first) throw InvalidArgument("region smaller than one patch");

  Rng rng(seed);
  std::uniform_int_distribution<int> pick_r(r_first, r_last), pick_c(c_first, c_last);
  std::vector<double> stds;
  stds.reserve(n_patches);
  for (std::size_t p = 0; p < n_patches; ++p) {
    const int r0 = pick_r(rng), c0 = pick_c(rng);
    const double n = box(sn, r0, c0);
    if (n < 2) continue;
    const double mean = box(s1, r0, c0) / n;
    const double var = std::max(0.0, box(s2, r0, c0) / n - mean * mean);
    stds.push_back(std::sqrt(var));
  }
  return robust_mean_std(stds);
}

}  // namespace implicity
