// SPDX-License-Identifier: Apache-2.0
#include "implicity/model/window_inputs.hpp"

#include <algorithm>
#include <cmath>

#include "implicity/common/error.hpp"

namespace implicity {

double sample_bilinear(const RasterGrid& g, double x, double y) {
  const GridSpec& s = g.spec();
  const double fc = std::clamp((x - s.x0) / s.cell_size - 0.5, 0.0, static_cast<double>(s.cols - 1));
  const double fr = std::clamp((y - s.y0) / s.cell_size - 0.5, 0.0, static_cast<double>(s.rows - 1));
  const int c0 = std::min(static_cast<int>(fc), s.cols - 1);
  const int r0 = std::min(static_cast<int>(fr), s.rows - 1);
  const int c1 = std::min(c0 + 1, s.cols - 1);
  const int r1 = std::min(r0 + 1, s.rows - 1);
  const double tx = fc - c0;
  const double ty = fr - r0;
  const double a = g.at(r0, c0) + tx * (g.at(r0, c1) - g.at(r0, c0));
  const double b = g.at(r1, c0) + tx * (g.at(r1, c1) - g.at(r1, c0));
  return a + ty * (b - a);
}

nn::Mat<float> image_patch(std::span<const RasterGrid* const> views, const Rect& window, const ModelConfig& cfg) {
  const int channels = cfg.image_channels();
  if (cfg.variant == Variant::Zero) return {};
  if (static_cast<int>(views.size()) < channels) throw InvalidArgument("not enough ortho views for the variant");
  const int S = cfg.image_res();
  const double px = window.width() / S;
  nn::Mat<float> out(channels, S * S);
  for (int ch = 0; ch < channels; ++ch) {
    const RasterGrid* g = views[static_cast<std::size_t>(ch)];
    if (!g) throw InvalidArgument("missing ortho view");
    const GridSpec& s = g->spec();
    // Fast path: pixel lattice coincides with the raster's cells.
    const double oc = (window.x0 - s.x0) / s.cell_size;
    const double orow = (window.y0 - s.y0) / s.cell_size;
    const bool aligned = std::abs(px - s.cell_size) < 1e-12 && std::abs(oc - std::round(oc)) < 1e-9 &&
                         std::abs(orow - std::round(orow)) < 1e-9 && oc >= 0 && orow >= 0 &&
                         std::lround(oc) + S <= s.cols && std::lround(orow) + S <= s.rows;
    for (int r = 0; r < S; ++r)
      for (int c = 0; c < S; ++c) {
        const double v = aligned ? g->at(static_cast<int>(std::lround(orow)) + r, static_cast<int>(std::lround(oc)) + c)
                                 : sample_bilinear(*g, window.x0 + (c + 0.5) * px, window.y0 + (r + 0.5) * px);
        out(ch, r * S + c) = static_cast<float>((v - cfg.image_mean) / cfg.image_std);
      }
  }
  return out;
}

nn::Mat<float> normalized_queries(std::span<const Vec3> queries, const PatchWindow& window) {
  nn::Mat<float> q(static_cast<Eigen::Index>(queries.size()), 3);
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const Vec3 n = window.normalize(queries[i]);
    const auto r = static_cast<Eigen::Index>(i);
    q(r, 0) = static_cast<float>(n.x);
    q(r, 1) = static_cast<float>(n.y);
    q(r, 2) = static_cast<float>(n.z);
  }
  return q;
}

WindowInputs prepare_window(const PointIndex& index, std::span<const RasterGrid* const> views, const Rect& window,
                            const ModelConfig& cfg) {
  if (std::abs(window.width() - window.height()) > 1e-9) throw InvalidArgument("model windows must be square");
  const std::vector<Vec3> pts = index.query(window);
  WindowInputs in;
  in.window = make_window({window.x0, window.y0}, window.width(), pts, cfg.z_scale);
  in.points = normalized_queries(pts, in.window);
  in.images = image_patch(views, window, cfg);
  return in;
}

}  // namespace implicity
