// SPDX-License-Identifier: Apache-2.0
#include "implicity/training/optim.hpp"

#include <cmath>

#include "implicity/common/error.hpp"

namespace implicity {

double cyclical_lr(long step, double base_lr, double amplitude, long cycle_length) {
  if (step < 0 || cycle_length <= 0) throw InvalidArgument("cyclical_lr needs step >= 0 and cycle_length > 0");
  const long pos = step % cycle_length;
  if (pos == 0) return base_lr;
  const double frac = static_cast<double>(pos) / static_cast<double>(cycle_length);
  return base_lr + amplitude * (1.0 - std::abs(2.0 * frac - 1.0));
}

Adam::Adam(double beta1, double beta2, double eps, double weight_decay)
    : beta1_(beta1), beta2_(beta2), eps_(eps), weight_decay_(weight_decay) {
  if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1)) throw InvalidArgument("Adam betas must lie in [0,1)");
  if (!(eps > 0) || weight_decay < 0) throw InvalidArgument("Adam eps must be > 0 and weight_decay >= 0");
}

void Adam::step(nn::ParamSet<float>& params, double lr) {
  auto& all = params.all();
  if (m_.empty()) {
    for (const auto& p : all) {
      m_.push_back(nn::Mat<float>::Zero(p.value.rows(), p.value.cols()));
      v_.push_back(nn::Mat<float>::Zero(p.value.rows(), p.value.cols()));
    }
  }
  if (m_.size() != all.size()) throw InvalidArgument("Adam used with a different parameter set");
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  const float b1 = static_cast<float>(beta1_), b2 = static_cast<float>(beta2_);
  for (std::size_t k = 0; k < all.size(); ++k) {
    auto& p = all[k];
    float* w = p.value.data();
    const float* g = p.grad.data();
    float* m = m_[k].data();
    float* v = v_[k].data();
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      const float gi = g[i] + static_cast<float>(weight_decay_) * w[i];
      m[i] = b1 * m[i] + (1.0f - b1) * gi;
      v[i] = b2 * v[i] + (1.0f - b2) * gi * gi;
      const double mh = m[i] / c1, vh = v[i] / c2;
      w[i] -= static_cast<float>(lr * mh / (std::sqrt(vh) + eps_));
    }
  }
}

}  // namespace implicity
