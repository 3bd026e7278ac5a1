// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

namespace implicity::nn {

template <class T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A named trainable tensor with its gradient accumulator. Matrices are 2D; conv
/// kernels are stored as [out x in*k*k].
template <class T>
struct Param {
  std::string name;
  Mat<T> value;
  Mat<T> grad;
};

/// Ordered parameter collection. Order is the insertion order and is part of the
/// checkpoint format.
template <class T>
class ParamSet {
 public:
  Param<T>& add(const std::string& name, Mat<T> value);
  Param<T>& operator[](const std::string& name);
  const Param<T>& operator[](const std::string& name) const;
  bool contains(const std::string& name) const;
  std::size_t size() const { return params_.size(); }
  std::vector<Param<T>>& all() { return params_; }
  const std::vector<Param<T>>& all() const { return params_; }
  void zero_grad();
  std::size_t scalar_count() const;

  template <class U>
  ParamSet<U> cast() const {
    ParamSet<U> out;
    for (const auto& p : params_) out.add(p.name, p.value.template cast<U>());
    return out;
  }

 private:
  std::vector<Param<T>> params_;
};

/// Handle to a tape node.
struct Var {
  int id = -1;
};

/// Reverse-mode autodiff over row-major matrices. Point features are [N x C]; feature
/// planes are [C x H*W] with H and W recorded on the node (row y, column x).
template <class T>
class Tape {
 public:
  /// With record == false nothing is kept for backward (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var param(Param<T>& p);
  Var constant(Mat<T> value, int h = 0, int w = 0);

  const Mat<T>& value(Var v) const { return nodes_[v.id].value; }
  const Mat<T>& grad(Var v) const { return nodes_[v.id].grad; }
  int height(Var v) const { return nodes_[v.id].h; }
  int width(Var v) const { return nodes_[v.id].w; }

  /// x[N x in] * W[in x out] + b[1 x out]; pass a default Var for no bias.
  Var linear(Var x, Var w, Var b);
  Var relu(Var x);
  Var add(Var a, Var b);
  Var concat_cols(Var a, Var b);
  /// Rows are concatenated; both must be planes of the same size.
  Var concat_channels(Var a, Var b);

  /// out[i] = channel-wise max over all rows j with cell[j] == cell[i].
  Var cell_max(Var x, std::span<const std::int32_t> cell, int n_cells);
  /// Plane [C x h*w] holding the mean of x rows per cell; empty cells are zero.
  Var scatter_mean(Var x, std::span<const std::int32_t> cell, int h, int w);

  /// Zero-padded 2D convolution; kernel [out x in*k*k], bias [out x 1] (optional).
  Var conv2d(Var x, Var kernel, Var bias, int k, int stride);
  Var maxpool2(Var x);
  Var upsample2(Var x);

  /// Bilinear read-out of a plane at normalized xy in [0,1]^2 (cell-centered lattice,
  /// clamped at the border). xy is [N x 2]; result [N x C].
  Var bilinear(Var plane, const Mat<T>& xy);

  /// scale * sum_i w_i * BCE(sigmoid(logit_i), o_i), probabilities clamped to
  /// [eps, 1-eps]; gradient is zero where the clamp is active.
  Var bce_logits(Var logits, std::span<const std::uint8_t> labels, std::span<const double> weights, double scale,
                 double eps = 1e-7);

  /// Seeds d(out)/d(out) = 1 for a 1x1 node and propagates to all parameters.
  void backward(Var out);

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Mat<T> value;
    Mat<T> grad;
    int h = 0;
    int w = 0;
    std::function<void()> back;
  };
  Var push(Mat<T> value, int h = 0, int w = 0);
  Mat<T>& g(Var v);  // lazily allocated gradient
  bool tracked(Var v) const { return record_ && v.id >= 0 && tracked_[v.id]; }

  bool record_;
  std::vector<Node> nodes_;
  std::vector<bool> tracked_;
};

}  // namespace implicity::nn
