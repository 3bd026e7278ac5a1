// SPDX-License-Identifier: Apache-2.0
#include "implicity/extraction/extract.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "implicity/common/error.hpp"

namespace implicity {

double ExtractionConfig::final_spacing() const { return z0_spacing / std::pow(refine_factor, iterations); }

void ExtractionConfig::validate() const {
  if (!(dsm_spacing > 0) || !(z0_spacing > 0)) throw InvalidArgument("extraction spacings must be positive");
  if (refine_factor < 2 || iterations < 0) throw InvalidArgument("refine_factor must be >= 2, iterations >= 0");
  if (!(threshold > 0 && threshold < 1)) throw InvalidArgument("extraction threshold must lie in (0,1)");
  if (!(window > 0) || !(stride > 0) || stride > window) throw InvalidArgument("need 0 < stride <= window");
  if (!(taper_floor > 0 && taper_floor <= 1)) throw InvalidArgument("taper_floor must lie in (0,1]");
  if (batch < 64) throw InvalidArgument("extraction batch must be >= 64");
}

ExtractionConfig ExtractionConfig::from_kv(const KvConfig& kv, const ExtractionConfig& d) {
  ExtractionConfig c = d;
  c.dsm_spacing = kv.get_double("extract.dsm_spacing", d.dsm_spacing);
  c.z0_spacing = kv.get_double("extract.z0_spacing", d.z0_spacing);
  c.refine_factor = static_cast<int>(kv.get_int("extract.refine_factor", d.refine_factor));
  c.iterations = static_cast<int>(kv.get_int("extract.iterations", d.iterations));
  c.threshold = kv.get_double("extract.threshold", d.threshold);
  c.window = kv.get_double("extract.window", d.window);
  c.stride = kv.get_double("extract.stride", d.stride);
  c.z_lo = kv.get_double("extract.z_lo", d.z_lo);
  c.z_hi = kv.get_double("extract.z_hi", d.z_hi);
  c.taper_floor = kv.get_double("extract.taper_floor", d.taper_floor);
  c.batch = static_cast<std::size_t>(kv.get_int("extract.batch", static_cast<long long>(d.batch)));
  return c;
}

KvConfig ExtractionConfig::to_kv() const {
  KvConfig kv;
  kv.set("extract.dsm_spacing", format_double(dsm_spacing));
  kv.set("extract.z0_spacing", format_double(z0_spacing));
  kv.set("extract.refine_factor", std::to_string(refine_factor));
  kv.set("extract.iterations", std::to_string(iterations));
  kv.set("extract.threshold", format_double(threshold));
  kv.set("extract.window", format_double(window));
  kv.set("extract.stride", format_double(stride));
  if (std::isfinite(z_lo)) kv.set("extract.z_lo", format_double(z_lo));
  if (std::isfinite(z_hi)) kv.set("extract.z_hi", format_double(z_hi));
  kv.set("extract.taper_floor", format_double(taper_floor));
  kv.set("extract.batch", std::to_string(batch));
  return kv;
}

int coarse_levels(const ExtractionConfig& cfg, double z_lo, double z_hi) {
  if (!(z_hi > z_lo)) throw InvalidArgument("extraction needs z_hi > z_lo");
  return static_cast<int>(std::ceil((z_hi - z_lo) / cfg.z0_spacing - 1e-9)) + 1;
}

namespace {

// Column refinement for many columns at once; one field call per stage and batch.
// `eval` maps (column indices, heights) to probabilities.
using BatchEval = std::function<void(std::span<const int> column, std::span<const double> z, std::span<float> out)>;

std::vector<ColumnResult> refine_batch(int n_columns, const BatchEval& eval, const ExtractionConfig& cfg, double z_lo,
                                       double z_hi) {
  const int K = coarse_levels(cfg, z_lo, z_hi);
  std::vector<ColumnResult> res(static_cast<std::size_t>(n_columns));
  std::vector<double> lower(static_cast<std::size_t>(n_columns));
  std::vector<char> active(static_cast<std::size_t>(n_columns), 1);

  std::vector<int> col;
  std::vector<double> zs;
  std::vector<float> out;
  col.reserve(static_cast<std::size_t>(n_columns) * K);
  zs.reserve(static_cast<std::size_t>(n_columns) * K);
  for (int c = 0; c < n_columns; ++c)
    for (int k = 0; k < K; ++k) {
      col.push_back(c);
      zs.push_back(z_lo + k * cfg.z0_spacing);
    }
  out.resize(zs.size());
  eval(col, zs, out);
  for (int c = 0; c < n_columns; ++c) {
    auto& r = res[static_cast<std::size_t>(c)];
    r.queries = K;
    int top = -1;
    for (int k = 0; k < K; ++k)
      if (out[static_cast<std::size_t>(c) * K + k] >= cfg.threshold) top = k;
    if (top < 0) {
      r.z = z_lo;
      r.floor_clamped = true;
      active[static_cast<std::size_t>(c)] = 0;
    } else if (top == K - 1) {
      r.z = z_lo + (K - 1) * cfg.z0_spacing;
      r.ceiling_clamped = true;
      active[static_cast<std::size_t>(c)] = 0;
    } else {
      lower[static_cast<std::size_t>(c)] = z_lo + top * cfg.z0_spacing;
    }
  }

  double step = cfg.z0_spacing;
  const int fresh = cfg.refine_factor - 1;
  for (int it = 0; it < cfg.iterations; ++it) {
    step /= cfg.refine_factor;
    col.clear();
    zs.clear();
    for (int c = 0; c < n_columns; ++c) {
      if (!active[static_cast<std::size_t>(c)]) continue;
      for (int j = 1; j <= fresh; ++j) {
        col.push_back(c);
        zs.push_back(lower[static_cast<std::size_t>(c)] + j * step);
      }
    }
    out.resize(zs.size());
    if (!zs.empty()) eval(col, zs, out);
    for (std::size_t q = 0; q < zs.size(); q += static_cast<std::size_t>(fresh)) {
      const int c = col[q];
      double best = lower[static_cast<std::size_t>(c)];
      for (int j = 0; j < fresh; ++j)
        if (out[q + j] >= cfg.threshold) best = zs[q + j];
      lower[static_cast<std::size_t>(c)] = best;
      res[static_cast<std::size_t>(c)].queries += fresh;
    }
  }
  for (int c = 0; c < n_columns; ++c)
    if (active[static_cast<std::size_t>(c)]) res[static_cast<std::size_t>(c)].z = lower[static_cast<std::size_t>(c)];
  return res;
}

double taper(double t, double ramp, double floor) {
  if (ramp <= 0) return 1.0;
  return std::clamp(t / ramp, floor, 1.0);
}

}  // namespace

ColumnResult refine_column(const ColumnFn& fn, const ExtractionConfig& cfg, double z_lo, double z_hi) {
  cfg.validate();
  const BatchEval eval = [&](std::span<const int>, std::span<const double> z, std::span<float> out) { fn(z, out); };
  return refine_batch(1, eval, cfg, z_lo, z_hi)[0];
}

std::vector<double> window_origins(double lo, double hi, double window, double stride, double snap) {
  if (!(hi > lo)) throw InvalidArgument("empty extraction range");
  auto snapped = [&](double v) { return snap > 0 ? std::round(v / snap) * snap : v; };
  std::vector<double> o;
  if (hi - lo <= window) {
    o.push_back(snapped(lo + 0.5 * (hi - lo - window)));
    return o;
  }
  for (double x = lo; x + window < hi - 1e-9; x += stride) o.push_back(snapped(x));
  const double last = snapped(hi - window);
  if (o.empty() || last > o.back() + 1e-9) o.push_back(last);
  return o;
}

namespace {

struct WindowPlan {
  std::vector<Rect> windows;
};

WindowPlan plan_windows(const OccupancyField& field, const Rect& region, const ExtractionConfig& cfg) {
  WindowPlan plan;
  const auto xs = window_origins(region.x0, region.x1, cfg.window, cfg.stride, cfg.dsm_spacing);
  const auto ys = window_origins(region.y0, region.y1, cfg.window, cfg.stride, cfg.dsm_spacing);
  const Rect cov = field.coverage();
  // A region narrower than a window may sit at the coverage edge: slide the window
  // inward rather than reaching past the inputs.
  const bool fits = cov.contains(region) && cov.width() >= cfg.window && cov.height() >= cfg.window;
  std::string missing;
  for (double y : ys)
    for (double x : xs) {
      if (fits) {
        x = std::clamp(x, cov.x0, cov.x1 - cfg.window);
        y = std::clamp(y, cov.y0, cov.y1 - cfg.window);
      }
      const Rect w{x, y, x + cfg.window, y + cfg.window};
      if (!cov.contains(w)) {
        char buf[128];
        std::snprintf(buf, sizeof buf, " [%.2f,%.2f]-[%.2f,%.2f]", w.x0, w.y0, w.x1, w.y1);
        missing += buf;
      }
      plan.windows.push_back(w);
    }
  if (!missing.empty()) throw InvalidArgument("region not covered by the inputs; missing windows:" + missing);
  return plan;
}

// Grid cells whose centers fall inside w (half-open).
void cell_range(const GridSpec& g, const Rect& w, int& r0, int& r1, int& c0, int& c1) {
  c0 = std::max(0, static_cast<int>(std::ceil((w.x0 - g.x0) / g.cell_size - 0.5 - 1e-9)));
  c1 = std::min(g.cols, static_cast<int>(std::ceil((w.x1 - g.x0) / g.cell_size - 0.5 - 1e-9)));
  r0 = std::max(0, static_cast<int>(std::ceil((w.y0 - g.y0) / g.cell_size - 0.5 - 1e-9)));
  r1 = std::min(g.rows, static_cast<int>(std::ceil((w.y1 - g.y0) / g.cell_size - 0.5 - 1e-9)));
}

}  // namespace

RasterGrid extract_dsm(OccupancyField& field, const Rect& region, const ExtractionConfig& cfg, ExtractionStats* stats) {
  cfg.validate();
  const GridSpec g = GridSpec::covering(region, cfg.dsm_spacing);
  auto [zr_lo, zr_hi] = field.z_range();
  const double z_lo = std::isfinite(cfg.z_lo) ? cfg.z_lo : zr_lo;
  const double z_hi = std::isfinite(cfg.z_hi) ? cfg.z_hi : zr_hi;
  const WindowPlan plan = plan_windows(field, region, cfg);
  const double ramp = cfg.window - cfg.stride;

  std::vector<double> sum(g.size(), 0.0), wsum(g.size(), 0.0);
  ExtractionStats st;
  for (const Rect& w : plan.windows) {
    int r0, r1, c0, c1;
    cell_range(g, w, r0, r1, c0, c1);
    if (r0 >= r1 || c0 >= c1) continue;
    field.begin_window(w);
    ++st.windows;
    std::vector<Vec2> xy;
    std::vector<std::size_t> cell;
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) {
        xy.push_back({g.x0 + (c + 0.5) * g.cell_size, g.y0 + (r + 0.5) * g.cell_size});
        cell.push_back(static_cast<std::size_t>(r) * g.cols + c);
      }
    std::vector<Vec3> pts;
    const BatchEval eval = [&](std::span<const int> col, std::span<const double> z, std::span<float> out) {
      for (std::size_t b = 0; b < z.size(); b += cfg.batch) {
        const std::size_t e = std::min(z.size(), b + cfg.batch);
        pts.resize(e - b);
        for (std::size_t i = b; i < e; ++i) pts[i - b] = {xy[static_cast<std::size_t>(col[i])].x, xy[static_cast<std::size_t>(col[i])].y, z[i]};
        field.evaluate(pts, out.subspan(b, e - b));
      }
    };
    const auto res = refine_batch(static_cast<int>(xy.size()), eval, cfg, z_lo, z_hi);
    for (std::size_t i = 0; i < res.size(); ++i) {
      const double wx = taper(std::min(xy[i].x - w.x0, w.x1 - xy[i].x), ramp, cfg.taper_floor);
      const double wy = taper(std::min(xy[i].y - w.y0, w.y1 - xy[i].y), ramp, cfg.taper_floor);
      sum[cell[i]] += wx * wy * res[i].z;
      wsum[cell[i]] += wx * wy;
      st.queries += static_cast<std::size_t>(res[i].queries);
      st.floor_clamped += res[i].floor_clamped;
      st.ceiling_clamped += res[i].ceiling_clamped;
    }
    st.columns += res.size();
  }
  RasterGrid dsm(g, kDefaultNodata);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(wsum[i] > 0)) throw NumericError("extraction left a cell uncovered");
    dsm.values()[i] = sum[i] / wsum[i];
  }
  if (stats) *stats = st;
  return dsm;
}

std::vector<RasterGrid> occupancy_slices(OccupancyField& field, const Rect& region, const ExtractionConfig& cfg,
                                         std::span<const double> heights) {
  cfg.validate();
  const GridSpec g = GridSpec::covering(region, cfg.dsm_spacing);
  const WindowPlan plan = plan_windows(field, region, cfg);
  std::vector<RasterGrid> out(heights.size(), RasterGrid(g, kDefaultNodata));
  std::vector<char> done(g.size(), 0);
  for (const Rect& w : plan.windows) {
    int r0, r1, c0, c1;
    cell_range(g, w, r0, r1, c0, c1);
    std::vector<std::size_t> cell;
    std::vector<Vec3> pts;
    for (int r = r0; r < r1; ++r)
      for (int c = c0; c < c1; ++c) {
        const std::size_t k = static_cast<std::size_t>(r) * g.cols + c;
        if (done[k]) continue;
        done[k] = 1;
        cell.push_back(k);
      }
    if (cell.empty()) continue;
    field.begin_window(w);
    std::vector<float> p;
    for (std::size_t h = 0; h < heights.size(); ++h) {
      pts.clear();
      for (const std::size_t k : cell)
        pts.push_back({g.x0 + (static_cast<double>(k % g.cols) + 0.5) * g.cell_size,
                       g.y0 + (static_cast<double>(k / g.cols) + 0.5) * g.cell_size, heights[h]});
      p.resize(pts.size());
      for (std::size_t b = 0; b < pts.size(); b += cfg.batch) {
        const std::size_t e = std::min(pts.size(), b + cfg.batch);
        field.evaluate(std::span<const Vec3>(pts).subspan(b, e - b), std::span<float>(p).subspan(b, e - b));
      }
      for (std::size_t i = 0; i < cell.size(); ++i) out[h].values()[cell[i]] = p[i];
    }
  }
  return out;
}

}  // namespace implicity
