// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "implicity/nn/tape.hpp"

namespace implicity {

/// Triangular cycle: base at every multiple of cycle_length, base + amplitude halfway.
double cyclical_lr(long step, double base_lr, double amplitude, long cycle_length);

/// Adaptive-moment optimizer with bias correction. weight_decay adds an L2 term to
/// the gradient.
class Adam {
 public:
  Adam(double beta1, double beta2, double eps = 1e-8, double weight_decay = 0.0);
  void step(nn::ParamSet<float>& params, double lr);
  long steps() const { return t_; }

 private:
  double beta1_, beta2_, eps_, weight_decay_;
  long t_ = 0;
  std::vector<nn::Mat<float>> m_, v_;
};

}  // namespace implicity
