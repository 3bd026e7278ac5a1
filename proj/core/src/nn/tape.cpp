// SPDX-License-Identifier: Apache-2.0
#include "implicity/nn/tape.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "implicity/common/error.hpp"

namespace implicity::nn {

// ---------------------------------------------------------------------------------------
// ParamSet

template <class T>
Param<T>& ParamSet<T>::add(const std::string& name, Mat<T> value) {
  if (contains(name)) throw InvalidArgument("duplicate parameter " + name);
  params_.push_back({name, std::move(value), {}});
  return params_.back();
}

template <class T>
bool ParamSet<T>::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Param<T>& p) { return p.name == name; });
}

template <class T>
Param<T>& ParamSet<T>::operator[](const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw InvalidArgument("unknown parameter " + name);
}

template <class T>
const Param<T>& ParamSet<T>::operator[](const std::string& name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw InvalidArgument("unknown parameter " + name);
}

template <class T>
void ParamSet<T>::zero_grad() {
  for (auto& p : params_) p.grad.setZero(p.value.rows(), p.value.cols());
}

template <class T>
std::size_t ParamSet<T>::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

// ---------------------------------------------------------------------------------------
// Tape plumbing

template <class T>
Var Tape<T>::push(Mat<T> value, int h, int w) {
  nodes_.push_back({std::move(value), {}, h, w, {}});
  tracked_.push_back(false);
  return {static_cast<int>(nodes_.size()) - 1};
}

template <class T>
Mat<T>& Tape<T>::g(Var v) {
  auto& n = nodes_[v.id];
  if (n.grad.size() == 0) n.grad.setZero(n.value.rows(), n.value.cols());
  return n.grad;
}

template <class T>
Var Tape<T>::param(Param<T>& p) {
  Var v = push(p.value);
  if (record_) {
    tracked_[v.id] = true;
    Param<T>* target = &p;
    nodes_[v.id].back = [this, v, target] {
      if (target->grad.size() == 0) target->grad.setZero(target->value.rows(), target->value.cols());
      target->grad += nodes_[v.id].grad;
    };
  }
  return v;
}

template <class T>
Var Tape<T>::constant(Mat<T> value, int h, int w) {
  if (h > 0 && static_cast<long>(h) * w != value.cols())
    throw InvalidArgument("constant plane: h*w does not match column count");
  return push(std::move(value), h, w);
}

template <class T>
void Tape<T>::backward(Var out) {
  if (!record_) throw InvalidArgument("backward on a tape that does not record");
  if (value(out).size() != 1) throw InvalidArgument("backward needs a scalar output");
  g(out).setOnes();
  for (int id = out.id; id >= 0; --id) {
    auto& n = nodes_[id];
    if (tracked_[id] && n.back && n.grad.size() != 0) n.back();
  }
}

// ---------------------------------------------------------------------------------------
// Dense ops

template <class T>
Var Tape<T>::linear(Var x, Var w, Var b) {
  const auto& X = value(x);
  const auto& W = value(w);
  if (X.cols() != W.rows()) throw InvalidArgument("linear: shape mismatch");
  Mat<T> Y = X * W;
  if (b.id >= 0) {
    if (value(b).cols() != W.cols() || value(b).rows() != 1) throw InvalidArgument("linear: bad bias shape");
    Y.rowwise() += value(b).row(0);
  }
  Var y = push(std::move(Y));
  if (tracked(x) || tracked(w) || tracked(b)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, x, w, b, y] {
      const auto& G = nodes_[y.id].grad;
      if (tracked(x)) g(x).noalias() += G * value(w).transpose();
      if (tracked(w)) g(w).noalias() += value(x).transpose() * G;
      if (tracked(b)) g(b) += G.colwise().sum();
    };
  }
  return y;
}

template <class T>
Var Tape<T>::relu(Var x) {
  Var y = push(value(x).cwiseMax(T(0)), height(x), width(x));
  if (tracked(x)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, x, y] {
      g(x) += (value(x).array() > T(0)).select(nodes_[y.id].grad, T(0)).matrix();
    };
  }
  return y;
}

template <class T>
Var Tape<T>::add(Var a, Var b) {
  if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
    throw InvalidArgument("add: shape mismatch");
  Var y = push(value(a) + value(b), height(a), width(a));
  if (tracked(a) || tracked(b)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, a, b, y] {
      if (tracked(a)) g(a) += nodes_[y.id].grad;
      if (tracked(b)) g(b) += nodes_[y.id].grad;
    };
  }
  return y;
}

template <class T>
Var Tape<T>::concat_cols(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.rows() != B.rows()) throw InvalidArgument("concat_cols: row mismatch");
  Mat<T> Y(A.rows(), A.cols() + B.cols());
  Y << A, B;
  Var y = push(std::move(Y));
  if (tracked(a) || tracked(b)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, a, b, y] {
      const auto& G = nodes_[y.id].grad;
      const auto ca = value(a).cols();
      if (tracked(a)) g(a) += G.leftCols(ca);
      if (tracked(b)) g(b) += G.rightCols(G.cols() - ca);
    };
  }
  return y;
}

template <class T>
Var Tape<T>::concat_channels(Var a, Var b) {
  const auto& A = value(a);
  const auto& B = value(b);
  if (A.cols() != B.cols() || height(a) != height(b)) throw InvalidArgument("concat_channels: size mismatch");
  Mat<T> Y(A.rows() + B.rows(), A.cols());
  Y << A, B;
  Var y = push(std::move(Y), height(a), width(a));
  if (tracked(a) || tracked(b)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, a, b, y] {
      const auto& G = nodes_[y.id].grad;
      const auto ra = value(a).rows();
      if (tracked(a)) g(a) += G.topRows(ra);
      if (tracked(b)) g(b) += G.bottomRows(G.rows() - ra);
    };
  }
  return y;
}

// ---------------------------------------------------------------------------------------
// Point <-> plane ops

template <class T>
Var Tape<T>::cell_max(Var x, std::span<const std::int32_t> cell, int n_cells) {
  const auto& X = value(x);
  const auto N = X.rows(), C = X.cols();
  if (static_cast<std::size_t>(N) != cell.size()) throw InvalidArgument("cell_max: index length mismatch");
  Mat<T> best = Mat<T>::Constant(n_cells, C, -std::numeric_limits<T>::infinity());
  std::vector<std::int32_t> arg(static_cast<std::size_t>(n_cells) * C, -1);
  for (Eigen::Index i = 0; i < N; ++i) {
    const int k = cell[i];
    if (k < 0 || k >= n_cells) throw InvalidArgument("cell_max: cell index out of range");
    for (Eigen::Index c = 0; c < C; ++c) {
      if (X(i, c) > best(k, c)) {
        best(k, c) = X(i, c);
        arg[static_cast<std::size_t>(k) * C + c] = static_cast<std::int32_t>(i);
      }
    }
  }
  Mat<T> Y(N, C);
  for (Eigen::Index i = 0; i < N; ++i) Y.row(i) = best.row(cell[i]);
  Var y = push(std::move(Y));
  if (tracked(x)) {
    tracked_[y.id] = true;
    std::vector<std::int32_t> cells(cell.begin(), cell.end());
    nodes_[y.id].back = [this, x, y, C, cells = std::move(cells), arg = std::move(arg)] {
      const auto& G = nodes_[y.id].grad;
      auto& GX = g(x);
      for (std::size_t i = 0; i < cells.size(); ++i)
        for (Eigen::Index c = 0; c < C; ++c)
          GX(arg[static_cast<std::size_t>(cells[i]) * C + c], c) += G(static_cast<Eigen::Index>(i), c);
    };
  }
  return y;
}

template <class T>
Var Tape<T>::scatter_mean(Var x, std::span<const std::int32_t> cell, int h, int w) {
  const auto& X = value(x);
  const auto N = X.rows(), C = X.cols();
  const int n_cells = h * w;
  if (static_cast<std::size_t>(N) != cell.size()) throw InvalidArgument("scatter_mean: index length mismatch");
  std::vector<int> count(static_cast<std::size_t>(n_cells), 0);
  Mat<T> sumT = Mat<T>::Zero(n_cells, C);
  for (Eigen::Index i = 0; i < N; ++i) {
    const int k = cell[i];
    if (k < 0 || k >= n_cells) throw InvalidArgument("scatter_mean: cell index out of range");
    sumT.row(k) += X.row(i);
    ++count[k];
  }
  for (int k = 0; k < n_cells; ++k)
    if (count[k] > 0) sumT.row(k) /= T(count[k]);
  Var y = push(sumT.transpose(), h, w);
  if (tracked(x)) {
    tracked_[y.id] = true;
    std::vector<std::int32_t> cells(cell.begin(), cell.end());
    nodes_[y.id].back = [this, x, y, cells = std::move(cells), count = std::move(count)] {
      const Mat<T> GT = nodes_[y.id].grad.transpose();
      auto& GX = g(x);
      for (std::size_t i = 0; i < cells.size(); ++i)
        GX.row(static_cast<Eigen::Index>(i)) += GT.row(cells[i]) / T(count[cells[i]]);
    };
  }
  return y;
}

// ---------------------------------------------------------------------------------------
// Convolutions

namespace {

template <class T>
void im2col(const Mat<T>& x, int C, int H, int W, int k, int stride, int Ho, int Wo, Mat<T>& cols) {
  const int pad = k / 2;
  cols.resize(static_cast<Eigen::Index>(C) * k * k, static_cast<Eigen::Index>(Ho) * Wo);
  for (int c = 0; c < C; ++c) {
    const T* src = x.data() + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        T* dst = cols.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          T* row = dst + static_cast<std::size_t>(oy) * Wo;
          if (iy < 0 || iy >= H) {
            std::fill(row, row + Wo, T(0));
            continue;
          }
          const T* srow = src + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            row[ox] = (ix >= 0 && ix < W) ? srow[ix] : T(0);
          }
        }
      }
    }
  }
}

template <class T>
void col2im_add(const Mat<T>& cols, int C, int H, int W, int k, int stride, int Ho, int Wo, Mat<T>& gx) {
  const int pad = k / 2;
  for (int c = 0; c < C; ++c) {
    T* dst = gx.data() + static_cast<std::size_t>(c) * H * W;
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const T* src = cols.data() + static_cast<std::size_t>((c * k + ky) * k + kx) * Ho * Wo;
        for (int oy = 0; oy < Ho; ++oy) {
          const int iy = oy * stride - pad + ky;
          if (iy < 0 || iy >= H) continue;
          const T* row = src + static_cast<std::size_t>(oy) * Wo;
          T* drow = dst + static_cast<std::size_t>(iy) * W;
          for (int ox = 0; ox < Wo; ++ox) {
            const int ix = ox * stride - pad + kx;
            if (ix >= 0 && ix < W) drow[ix] += row[ox];
          }
        }
      }
    }
  }
}

}  // namespace

template <class T>
Var Tape<T>::conv2d(Var x, Var kernel, Var bias, int k, int stride) {
  const int H = height(x), W = width(x);
  const int C = static_cast<int>(value(x).rows());
  const auto& K = value(kernel);
  if (H <= 0 || k % 2 == 0 || stride < 1) throw InvalidArgument("conv2d: bad plane or kernel geometry");
  if (K.cols() != static_cast<Eigen::Index>(C) * k * k) throw InvalidArgument("conv2d: kernel/input channel mismatch");
  const int pad = k / 2;
  const int Ho = (H + 2 * pad - k) / stride + 1, Wo = (W + 2 * pad - k) / stride + 1;
  Mat<T> Y;
  if (k == 1 && stride == 1) {
    Y.noalias() = K * value(x);
  } else {
    Mat<T> cols;
    im2col(value(x), C, H, W, k, stride, Ho, Wo, cols);
    Y.noalias() = K * cols;
  }
  if (bias.id >= 0) {
    if (value(bias).rows() != K.rows() || value(bias).cols() != 1) throw InvalidArgument("conv2d: bad bias shape");
    Y.colwise() += value(bias).col(0);
  }
  Var y = push(std::move(Y), Ho, Wo);
  if (tracked(x) || tracked(kernel) || tracked(bias)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, x, kernel, bias, y, C, H, W, k, stride, Ho, Wo] {
      const auto& G = nodes_[y.id].grad;
      if (tracked(bias)) g(bias) += G.rowwise().sum();
      if (k == 1 && stride == 1) {
        if (tracked(kernel)) g(kernel).noalias() += G * value(x).transpose();
        if (tracked(x)) g(x).noalias() += value(kernel).transpose() * G;
        return;
      }
      if (tracked(kernel)) {
        Mat<T> cols;
        im2col(value(x), C, H, W, k, stride, Ho, Wo, cols);
        g(kernel).noalias() += G * cols.transpose();
      }
      if (tracked(x)) {
        const Mat<T> dcols = value(kernel).transpose() * G;
        col2im_add(dcols, C, H, W, k, stride, Ho, Wo, g(x));
      }
    };
  }
  return y;
}

template <class T>
Var Tape<T>::maxpool2(Var x) {
  const int H = height(x), W = width(x);
  if (H < 2 || W < 2 || H % 2 || W % 2) throw InvalidArgument("maxpool2: plane size must be even");
  const int Ho = H / 2, Wo = W / 2;
  const auto& X = value(x);
  const auto C = X.rows();
  Mat<T> Y(C, static_cast<Eigen::Index>(Ho) * Wo);
  std::vector<std::int32_t> arg(static_cast<std::size_t>(Y.size()));
  for (Eigen::Index c = 0; c < C; ++c) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        int best = (2 * oy) * W + 2 * ox;
        for (const int o : {1, W, W + 1})
          if (X(c, (2 * oy) * W + 2 * ox + o) > X(c, best)) best = (2 * oy) * W + 2 * ox + o;
        const Eigen::Index j = static_cast<Eigen::Index>(oy) * Wo + ox;
        Y(c, j) = X(c, best);
        arg[static_cast<std::size_t>(c * Y.cols() + j)] = best;
      }
    }
  }
  Var y = push(std::move(Y), Ho, Wo);
  if (tracked(x)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, x, y, arg = std::move(arg)] {
      const auto& G = nodes_[y.id].grad;
      auto& GX = g(x);
      for (Eigen::Index c = 0; c < G.rows(); ++c)
        for (Eigen::Index j = 0; j < G.cols(); ++j) GX(c, arg[static_cast<std::size_t>(c * G.cols() + j)]) += G(c, j);
    };
  }
  return y;
}

template <class T>
Var Tape<T>::upsample2(Var x) {
  const int H = height(x), W = width(x);
  if (H <= 0) throw InvalidArgument("upsample2: input is not a plane");
  const auto& X = value(x);
  const auto C = X.rows();
  const int Ho = 2 * H, Wo = 2 * W;
  Mat<T> Y(C, static_cast<Eigen::Index>(Ho) * Wo);
  for (Eigen::Index c = 0; c < C; ++c)
    for (int oy = 0; oy < Ho; ++oy)
      for (int ox = 0; ox < Wo; ++ox) Y(c, oy * Wo + ox) = X(c, (oy / 2) * W + ox / 2);
  Var y = push(std::move(Y), Ho, Wo);
  if (tracked(x)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, x, y, H, W, Wo] {
      const auto& G = nodes_[y.id].grad;
      auto& GX = g(x);
      for (Eigen::Index c = 0; c < G.rows(); ++c)
        for (int oy = 0; oy < 2 * H; ++oy)
          for (int ox = 0; ox < Wo; ++ox) GX(c, (oy / 2) * W + ox / 2) += G(c, oy * Wo + ox);
    };
  }
  return y;
}

// ---------------------------------------------------------------------------------------
// Plane read-out

template <class T>
Var Tape<T>::bilinear(Var plane, const Mat<T>& xy) {
  const int H = height(plane), W = width(plane);
  if (H <= 0 || xy.cols() != 2) throw InvalidArgument("bilinear: needs a plane and [N x 2] coordinates");
  const auto N = xy.rows();
  const Mat<T> PT = value(plane).transpose();  // [H*W x C]
  std::vector<std::int32_t> idx(static_cast<std::size_t>(N) * 4);
  std::vector<T> wt(static_cast<std::size_t>(N) * 4);
  Mat<T> Y(N, PT.cols());
  for (Eigen::Index n = 0; n < N; ++n) {
    if (!std::isfinite(static_cast<double>(xy(n, 0))) || !std::isfinite(static_cast<double>(xy(n, 1))))
      throw InvalidArgument("bilinear: non-finite coordinate");
    const T u = std::clamp(xy(n, 0) * T(W) - T(0.5), T(0), T(W - 1));
    const T v = std::clamp(xy(n, 1) * T(H) - T(0.5), T(0), T(H - 1));
    const int c0 = std::min(static_cast<int>(u), W - 1), r0 = std::min(static_cast<int>(v), H - 1);
    const int c1 = std::min(c0 + 1, W - 1), r1 = std::min(r0 + 1, H - 1);
    const T fu = u - T(c0), fv = v - T(r0);
    const std::size_t b = static_cast<std::size_t>(n) * 4;
    idx[b] = r0 * W + c0;
    idx[b + 1] = r0 * W + c1;
    idx[b + 2] = r1 * W + c0;
    idx[b + 3] = r1 * W + c1;
    wt[b] = (T(1) - fu) * (T(1) - fv);
    wt[b + 1] = fu * (T(1) - fv);
    wt[b + 2] = (T(1) - fu) * fv;
    wt[b + 3] = fu * fv;
    Y.row(n) = wt[b] * PT.row(idx[b]) + wt[b + 1] * PT.row(idx[b + 1]) + wt[b + 2] * PT.row(idx[b + 2]) +
               wt[b + 3] * PT.row(idx[b + 3]);
  }
  Var y = push(std::move(Y));
  if (tracked(plane)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, plane, y, idx = std::move(idx), wt = std::move(wt)] {
      const auto& G = nodes_[y.id].grad;
      Mat<T> GT = Mat<T>::Zero(value(plane).cols(), value(plane).rows());
      for (Eigen::Index n = 0; n < G.rows(); ++n)
        for (int t = 0; t < 4; ++t) {
          const std::size_t b = static_cast<std::size_t>(n) * 4 + t;
          GT.row(idx[b]) += wt[b] * G.row(n);
        }
      g(plane) += GT.transpose();
    };
  }
  return y;
}

// ---------------------------------------------------------------------------------------
// Loss

template <class T>
Var Tape<T>::bce_logits(Var logits, std::span<const std::uint8_t> labels, std::span<const double> weights,
                        double scale, double eps) {
  const auto& L = value(logits);
  const auto N = L.rows();
  if (L.cols() != 1 || static_cast<std::size_t>(N) != labels.size() || labels.size() != weights.size())
    throw InvalidArgument("bce_logits: length mismatch");
  std::vector<T> dl(static_cast<std::size_t>(N));
  double total = 0.0;
  for (Eigen::Index i = 0; i < N; ++i) {
    const double l = static_cast<double>(L(i, 0));
    double p = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
    const bool clamped = p < eps || p > 1.0 - eps;
    p = std::clamp(p, eps, 1.0 - eps);
    const double o = labels[i] ? 1.0 : 0.0;
    // -ln p and -ln(1-p) straight from the logit; going through p loses digits once
    // the sigmoid saturates.
    auto softplus = [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
    const double nlp = clamped ? -std::log(p) : softplus(-l);
    const double nlq = clamped ? -std::log1p(-p) : softplus(l);
    const double term = o * nlp + (1.0 - o) * nlq;
    total += weights[i] * term;
    dl[static_cast<std::size_t>(i)] = clamped ? T(0) : static_cast<T>(scale * weights[i] * (p - o));
  }
  Mat<T> Y(1, 1);
  Y(0, 0) = static_cast<T>(scale * total);
  Var y = push(std::move(Y));
  if (tracked(logits)) {
    tracked_[y.id] = true;
    nodes_[y.id].back = [this, logits, y, dl = std::move(dl)] {
      const T G = nodes_[y.id].grad(0, 0);
      auto& GL = g(logits);
      for (std::size_t i = 0; i < dl.size(); ++i) GL(static_cast<Eigen::Index>(i), 0) += G * dl[i];
    };
  }
  return y;
}

template class ParamSet<float>;
template class ParamSet<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace implicity::nn
