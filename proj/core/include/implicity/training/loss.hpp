// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>

namespace implicity {

inline constexpr double kBceEps = 1e-7;

/// Weighted binary cross-entropy normalized by the weight sum:
///   -sum_i w_i (o_i ln p_i + (1 - o_i) ln(1 - p_i)) / sum_i w_i,  p = clamp(o_hat, eps, 1 - eps).
/// Throws InvalidArgument on length mismatch, negative weights or a zero weight sum.
double bce_loss(std::span<const double> o_hat, std::span<const double> o, std::span<const double> w);

}  // namespace implicity
