// SPDX-License-Identifier: Apache-2.0
#include "implicity/training/augment.hpp"

#include "implicity/common/error.hpp"

namespace implicity {

WindowTransform WindowTransform::from_degrees(int alpha_deg, bool flip_x, bool flip_y) {
  if (alpha_deg != 0 && alpha_deg != 90 && alpha_deg != 180 && alpha_deg != 270)
    throw InvalidArgument("rotation must be a quarter turn, got " + std::to_string(alpha_deg));
  return {alpha_deg / 90, flip_x, flip_y};
}

Vec2 WindowTransform::apply(Vec2 p) const {
  for (int k = 0; k < quarter_turns; ++k) p = {1.0 - p.y, p.x};
  if (flip_x) p.x = 1.0 - p.x;
  if (flip_y) p.y = 1.0 - p.y;
  return p;
}

Vec2 WindowTransform::invert(Vec2 p) const {
  if (flip_y) p.y = 1.0 - p.y;
  if (flip_x) p.x = 1.0 - p.x;
  for (int k = 0; k < quarter_turns; ++k) p = {p.y, 1.0 - p.x};
  return p;
}

namespace {

void transform_xy(nn::Mat<float>& m, const WindowTransform& t) {
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const Vec2 p = t.apply({m(i, 0), m(i, 1)});
    m(i, 0) = static_cast<float>(p.x);
    m(i, 1) = static_cast<float>(p.y);
  }
}

// Pixel (r, c) of the output takes the input pixel whose center maps onto it.
nn::Mat<float> transform_images(const nn::Mat<float>& img, int S, const WindowTransform& t) {
  nn::Mat<float> out(img.rows(), img.cols());
  for (int r = 0; r < S; ++r)
    for (int c = 0; c < S; ++c) {
      int sr = r, sc = c;
      if (t.flip_y) sr = S - 1 - sr;
      if (t.flip_x) sc = S - 1 - sc;
      for (int k = 0; k < t.quarter_turns; ++k) {
        const int nr = S - 1 - sc, nc = sr;  // inverse of one CCW quarter turn
        sr = nr;
        sc = nc;
      }
      out.col(r * S + c) = img.col(sr * S + sc);
    }
  return out;
}

}  // namespace

PatchBundle augment_patch(const PatchBundle& bundle, const WindowTransform& t) {
  if (t.quarter_turns < 0 || t.quarter_turns > 3) throw InvalidArgument("quarter_turns must lie in 0..3");
  PatchBundle out = bundle;
  if (t.identity()) return out;
  transform_xy(out.points, t);
  transform_xy(out.queries, t);
  if (out.images.size()) {
    if (static_cast<Eigen::Index>(bundle.image_res) * bundle.image_res != bundle.images.cols())
      throw InvalidArgument("image_res does not match the image patch");
    out.images = transform_images(bundle.images, bundle.image_res, t);
  }
  return out;
}

PatchBundle augment_patch(const PatchBundle& bundle, int alpha_deg, bool flip_x, bool flip_y) {
  return augment_patch(bundle, WindowTransform::from_degrees(alpha_deg, flip_x, flip_y));
}

}  // namespace implicity
