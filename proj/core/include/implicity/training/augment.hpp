// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <vector>

#include "implicity/geometry/vec.hpp"
#include "implicity/nn/tape.hpp"

namespace implicity {

/// Everything the network sees of one training window, in normalized coordinates.
struct PatchBundle {
  nn::Mat<float> points;   // [N x 3]
  nn::Mat<float> images;   // [channels x S*S]; may be empty
  int image_res = 0;       // S
  nn::Mat<float> queries;  // [M x 3]
  std::vector<std::uint8_t> labels;
  std::vector<double> weights;
};

/// Quarter-turn rotation about the window center (counter-clockwise, applied first)
/// followed by optional mirror flips, acting on normalized xy in [0,1]^2.
struct WindowTransform {
  int quarter_turns = 0;  // 0..3
  bool flip_x = false;    // x -> 1 - x
  bool flip_y = false;    // y -> 1 - y

  static WindowTransform from_degrees(int alpha_deg, bool flip_x, bool flip_y);
  Vec2 apply(Vec2 p) const;
  Vec2 invert(Vec2 p) const;
  bool identity() const { return quarter_turns == 0 && !flip_x && !flip_y; }
};

/// Applies one transform consistently to points, images and queries; z and labels are
/// untouched. Throws InvalidArgument unless alpha is 0, 90, 180 or 270.
PatchBundle augment_patch(const PatchBundle& bundle, int alpha_deg, bool flip_x, bool flip_y);
PatchBundle augment_patch(const PatchBundle& bundle, const WindowTransform& t);

}  // namespace implicity
