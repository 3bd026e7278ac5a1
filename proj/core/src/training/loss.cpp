// SPDX-License-Identifier: Apache-2.0
#include "implicity/training/loss.hpp"

#include <algorithm>
#include <cmath>

#include "implicity/common/error.hpp"

namespace implicity {

double bce_loss(std::span<const double> o_hat, std::span<const double> o, std::span<const double> w) {
  if (o_hat.size() != o.size() || o.size() != w.size()) throw InvalidArgument("bce_loss: length mismatch");
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < o.size(); ++i) {
    if (!(w[i] >= 0.0)) throw InvalidArgument("bce_loss: negative or NaN weight");
    const double p = std::clamp(o_hat[i], kBceEps, 1.0 - kBceEps);
    // log1p keeps ln(1 - p) accurate when p is tiny.
    num -= w[i] * (o[i] * std::log(p) + (1.0 - o[i]) * std::log1p(-p));
    den += w[i];
  }
  if (!(den > 0.0)) throw InvalidArgument("bce_loss: weights sum to zero");
  return num / den;
}

}  // namespace implicity
