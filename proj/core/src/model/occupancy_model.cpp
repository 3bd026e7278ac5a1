// SPDX-License-Identifier: Apache-2.0
#include "implicity/model/occupancy_model.hpp"

#include <algorithm>
#include <cmath>

#include "implicity/common/error.hpp"
#include "implicity/common/rng.hpp"

namespace implicity {

using nn::Mat;
using nn::Tape;
using nn::Var;

const char* to_string(Variant v) {
  switch (v) {
    case Variant::Zero: return "zero";
    case Variant::Mono: return "mono";
    case Variant::Stereo: return "stereo";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "zero") return Variant::Zero;
  if (s == "mono") return Variant::Mono;
  if (s == "stereo") return Variant::Stereo;
  throw InvalidArgument("unknown variant '" + s + "' (expected zero, mono or stereo)");
}

void ModelConfig::validate() const {
  if (d < 1) throw InvalidArgument("model d must be >= 1");
  if (unet_depth < 1 || unet_convs < 1 || unet_channel_cap < 1) throw InvalidArgument("bad U-Net configuration");
  if (psi_res < 1 || psi_res % (1 << (unet_depth - 1)) != 0)
    throw InvalidArgument("psi_res must be divisible by 2^(unet_depth-1)");
  if (hourglass_depth < 1 || hourglass_stacks < 1) throw InvalidArgument("bad hourglass configuration");
  if (xi_res < 2 || xi_res % (1 << hourglass_depth) != 0)
    throw InvalidArgument("xi_res must be divisible by 2^hourglass_depth");
  if (!(z_scale > 0) || !(image_std > 0)) throw InvalidArgument("normalization scales must be positive");
}

ModelConfig ModelConfig::from_kv(const KvConfig& kv, const ModelConfig& d) {
  ModelConfig c = d;
  c.variant = variant_from_string(kv.get_string("model.variant", to_string(d.variant)));
  c.d = static_cast<int>(kv.get_int("model.d", d.d));
  c.psi_res = static_cast<int>(kv.get_int("model.psi_res", d.psi_res));
  c.xi_res = static_cast<int>(kv.get_int("model.xi_res", d.xi_res));
  c.unet_depth = static_cast<int>(kv.get_int("model.unet_depth", d.unet_depth));
  c.unet_convs = static_cast<int>(kv.get_int("model.unet_convs", d.unet_convs));
  c.unet_channel_cap = static_cast<int>(kv.get_int("model.unet_channel_cap", d.unet_channel_cap));
  c.hourglass_depth = static_cast<int>(kv.get_int("model.hourglass_depth", d.hourglass_depth));
  c.hourglass_stacks = static_cast<int>(kv.get_int("model.hourglass_stacks", d.hourglass_stacks));
  c.init_seed = static_cast<std::uint64_t>(kv.get_int("model.init_seed", static_cast<long long>(d.init_seed)));
  c.z_scale = kv.get_double("model.z_scale", d.z_scale);
  c.image_mean = kv.get_double("model.image_mean", d.image_mean);
  c.image_std = kv.get_double("model.image_std", d.image_std);
  return c;
}

KvConfig ModelConfig::to_kv() const {
  KvConfig kv;
  kv.set("model.variant", to_string(variant));
  kv.set("model.d", std::to_string(d));
  kv.set("model.psi_res", std::to_string(psi_res));
  kv.set("model.xi_res", std::to_string(xi_res));
  kv.set("model.unet_depth", std::to_string(unet_depth));
  kv.set("model.unet_convs", std::to_string(unet_convs));
  kv.set("model.unet_channel_cap", std::to_string(unet_channel_cap));
  kv.set("model.hourglass_depth", std::to_string(hourglass_depth));
  kv.set("model.hourglass_stacks", std::to_string(hourglass_stacks));
  kv.set("model.init_seed", std::to_string(init_seed));
  kv.set("model.z_scale", format_double(z_scale));
  kv.set("model.image_mean", format_double(image_mean));
  kv.set("model.image_std", format_double(image_std));
  return kv;
}

ModelConfig ModelConfig::tiny(Variant v) {
  ModelConfig c;
  c.variant = v;
  c.d = 4;
  c.psi_res = 8;
  c.xi_res = 8;
  c.unet_depth = 3;
  c.unet_convs = 1;
  c.unet_channel_cap = 2;
  c.hourglass_depth = 2;
  return c;
}

namespace {

int unet_channels(const ModelConfig& cfg, int level) {
  return std::min(cfg.d << level, cfg.unet_channel_cap * cfg.d);
}

// Parameter layout shared by initialization and checkpoint validation.
struct Slot {
  std::string name;
  int rows;
  int cols;
  int fan_in;
  bool relu;  // feeds a rectifier
  bool bias;
  bool zero = false;  // last layer of a residual branch: starts at zero so blocks start as identities
};

struct Layout {
  std::vector<Slot> slots;

  void dense(const std::string& n, int in, int out, bool relu, bool bias = true, bool zero = false) {
    slots.push_back({n + ".W", in, out, in, relu, false, zero});
    if (bias) slots.push_back({n + ".b", 1, out, in, false, true});
  }
  void conv(const std::string& n, int in, int out, int k, bool relu, bool zero = false) {
    slots.push_back({n + ".K", out, in * k * k, in * k * k, relu, false, zero});
    slots.push_back({n + ".b", out, 1, in * k * k, false, true});
  }
  void res_conv(const std::string& n, int c) {
    conv(n + ".c0", c, c, 3, true);
    conv(n + ".c1", c, c, 3, false, true);
  }
  void hourglass(const std::string& n, int c, int depth) {
    res_conv(n + ".up1", c);
    res_conv(n + ".low1", c);
    if (depth > 1)
      hourglass(n + ".inner", c, depth - 1);
    else
      res_conv(n + ".low2", c);
    res_conv(n + ".low3", c);
  }
};

Layout make_layout(const ModelConfig& cfg) {
  cfg.validate();
  const int d = cfg.d;
  Layout L;
  L.dense("enc.fc_pos", 3, 2 * d, true);
  for (int i = 0; i < kPointBlocks; ++i) {
    const std::string b = "enc.block" + std::to_string(i);
    L.dense(b + ".fc0", 2 * d, d, true);
    L.dense(b + ".fc1", d, d, false, true, true);
    L.dense(b + ".sc", 2 * d, d, false, false);
  }
  L.dense("enc.fc_c", d, d, false);

  for (int l = 0; l < cfg.unet_depth; ++l)
    for (int j = 0; j < cfg.unet_convs; ++j)
      L.conv("unet.down" + std::to_string(l) + ".conv" + std::to_string(j),
             j > 0 ? unet_channels(cfg, l) : (l == 0 ? d : unet_channels(cfg, l - 1)), unet_channels(cfg, l), 3, true);
  for (int l = cfg.unet_depth - 2; l >= 0; --l) {
    const std::string u = "unet.up" + std::to_string(l);
    L.conv(u + ".proj", unet_channels(cfg, l + 1), unet_channels(cfg, l), 1, false);
    for (int j = 0; j < cfg.unet_convs; ++j)
      L.conv(u + ".conv" + std::to_string(j), j == 0 ? 2 * unet_channels(cfg, l) : unet_channels(cfg, l),
             unet_channels(cfg, l), 3, true);
  }
  L.conv("unet.out", unet_channels(cfg, 0), d, 1, false);

  if (cfg.variant != Variant::Zero) {
    L.conv("img.stem0", 2, d, 3, true);
    L.conv("img.stem1", d, d, 3, true);
    for (int s = 0; s < cfg.hourglass_stacks; ++s) L.hourglass("img.hg" + std::to_string(s), d, cfg.hourglass_depth);
    L.conv("img.head", d, d, 1, false);
  }

  L.dense("dec.fc_p", 3, d, false);
  for (int i = 0; i < kDecoderBlocks; ++i) {
    L.dense("dec.fc_c" + std::to_string(i), d, d, false);
    L.dense("dec.block" + std::to_string(i) + ".fc0", d, d, true);
    L.dense("dec.block" + std::to_string(i) + ".fc1", d, d, false, true, true);
  }
  L.dense("dec.out", d, 1, false, true, true);  // start at p = sigmoid(bias), close to 1/2
  return L;
}

template <class T>
struct Net {
  Tape<T>& t;
  nn::ParamSet<T>& p;
  const ModelConfig& cfg;

  Var P(const std::string& n) { return t.param(p[n]); }
  Var dense(Var x, const std::string& n, bool bias = true) {
    return t.linear(x, P(n + ".W"), bias ? P(n + ".b") : Var{});
  }
  Var conv(Var x, const std::string& n, int k, int stride = 1) {
    return t.conv2d(x, P(n + ".K"), P(n + ".b"), k, stride);
  }
  // Pre-activation fully connected residual block.
  Var res_fc(Var x, const std::string& n, bool shortcut) {
    const Var h = dense(t.relu(x), n + ".fc0");
    const Var dx = dense(t.relu(h), n + ".fc1");
    return t.add(shortcut ? dense(x, n + ".sc", false) : x, dx);
  }
  Var res_conv(Var x, const std::string& n) {
    const Var h = conv(t.relu(x), n + ".c0", 3);
    return t.add(x, conv(t.relu(h), n + ".c1", 3));
  }
  Var hourglass(Var x, const std::string& n, int depth) {
    const Var up1 = res_conv(x, n + ".up1");
    Var low = res_conv(t.maxpool2(x), n + ".low1");
    low = depth > 1 ? hourglass(low, n + ".inner", depth - 1) : res_conv(low, n + ".low2");
    low = res_conv(low, n + ".low3");
    return t.add(up1, t.upsample2(low));
  }
};

}  // namespace

template <class T>
ModelParamsT<T> init_params(const ModelConfig& cfg, std::uint64_t seed) {
  const Layout L = make_layout(cfg);
  ModelParamsT<T> params;
  Rng rng(mix_seed(seed ^ 0x5eedULL));
  for (const Slot& s : L.slots) {
    Mat<T> m(s.rows, s.cols);
    const double bound =
        s.zero ? 0.0 : s.bias ? 1.0 / std::sqrt(s.fan_in) : std::sqrt((s.relu ? 6.0 : 3.0) / s.fan_in);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(uniform(rng, -bound, bound));
    params.add(s.name, std::move(m));
  }
  if (cfg.variant != Variant::Zero) {
    // Kernel columns are (channel, ky, kx); copy channel 0 onto channel 1.
    auto& k = params["img.stem0.K"].value;
    k.rightCols(9) = k.leftCols(9);
  }
  return params;
}

template <class T>
Var build_shape_plane(Tape<T>& tape, ModelParamsT<T>& params, const ModelConfig& cfg, const Mat<T>& points) {
  if (points.rows() == 0) throw InvalidArgument("shape encoder needs at least one point");
  if (points.cols() != 3) throw InvalidArgument("shape encoder expects [N x 3] points");
  const int R = cfg.psi_res;
  std::vector<std::int32_t> cell(static_cast<std::size_t>(points.rows()));
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double x = points(i, 0), y = points(i, 1);
    if (!(x >= -0.2 && x <= 1.2 && y >= -0.2 && y <= 1.2) || !std::isfinite(static_cast<double>(points(i, 2))))
      throw InvalidArgument("shape encoder input is not window-normalized");
    const int cx = std::clamp(static_cast<int>(std::floor(x * R)), 0, R - 1);
    const int cy = std::clamp(static_cast<int>(std::floor(y * R)), 0, R - 1);
    cell[static_cast<std::size_t>(i)] = cy * R + cx;
  }
  Net<T> n{tape, params, cfg};
  Var net = n.dense(tape.constant(points), "enc.fc_pos");
  net = n.res_fc(net, "enc.block0", true);
  for (int b = 1; b < kPointBlocks; ++b) {
    const Var pooled = tape.cell_max(net, cell, R * R);
    net = n.res_fc(tape.concat_cols(net, pooled), "enc.block" + std::to_string(b), true);
  }
  const Var c = n.dense(net, "enc.fc_c");
  Var x = tape.scatter_mean(c, cell, R, R);

  std::vector<Var> skips;
  for (int l = 0; l < cfg.unet_depth; ++l) {
    if (l > 0) x = tape.maxpool2(x);
    for (int j = 0; j < cfg.unet_convs; ++j)
      x = tape.relu(n.conv(x, "unet.down" + std::to_string(l) + ".conv" + std::to_string(j), 3));
    skips.push_back(x);
  }
  for (int l = cfg.unet_depth - 2; l >= 0; --l) {
    const std::string u = "unet.up" + std::to_string(l);
    x = n.conv(tape.upsample2(x), u + ".proj", 1);
    x = tape.concat_channels(x, skips[static_cast<std::size_t>(l)]);
    for (int j = 0; j < cfg.unet_convs; ++j) x = tape.relu(n.conv(x, u + ".conv" + std::to_string(j), 3));
  }
  return n.conv(x, "unet.out", 1);
}

template <class T>
Var build_image_plane(Tape<T>& tape, ModelParamsT<T>& params, const ModelConfig& cfg, const Mat<T>& images) {
  if (cfg.variant == Variant::Zero) throw InvalidArgument("the zero variant has no image encoder");
  const int S = cfg.image_res();
  if (images.rows() != cfg.image_channels())
    throw InvalidArgument("image encoder expects " + std::to_string(cfg.image_channels()) + " channel(s) for the " +
                          to_string(cfg.variant) + " variant, got " + std::to_string(images.rows()));
  if (images.cols() != static_cast<Eigen::Index>(S) * S) throw InvalidArgument("image patch has the wrong size");
  Mat<T> two(2, images.cols());
  two.row(0) = images.row(0);
  two.row(1) = images.row(images.rows() - 1);  // mono: duplicated channel
  Net<T> n{tape, params, cfg};
  Var x = tape.constant(std::move(two), S, S);
  x = tape.relu(n.conv(x, "img.stem0", 3, 2));
  x = tape.relu(n.conv(x, "img.stem1", 3, 2));
  for (int s = 0; s < cfg.hourglass_stacks; ++s) x = n.hourglass(x, "img.hg" + std::to_string(s), cfg.hourglass_depth);
  return n.conv(tape.relu(x), "img.head", 1);
}

template <class T>
Var build_decoder(Tape<T>& tape, ModelParamsT<T>& params, const ModelConfig& cfg, Var psi, Var xi,
                  const Mat<T>& queries) {
  if (queries.cols() != 3) throw InvalidArgument("decoder expects [N x 3] queries");
  if (tape.height(psi) != cfg.psi_res || tape.value(psi).rows() != cfg.d)
    throw InvalidArgument("shape plane does not match the model configuration");
  if ((xi.id >= 0) != (cfg.variant != Variant::Zero)) throw InvalidArgument("image plane presence does not match variant");
  if (xi.id >= 0 && (tape.height(xi) != cfg.xi_res || tape.value(xi).rows() != cfg.d))
    throw InvalidArgument("image plane does not match the model configuration");
  Net<T> n{tape, params, cfg};
  const Mat<T> xy = queries.leftCols(2);
  Var c = tape.bilinear(psi, xy);
  if (xi.id >= 0) c = tape.add(c, tape.bilinear(xi, xy));
  Var net = n.dense(tape.constant(queries), "dec.fc_p");
  for (int i = 0; i < kDecoderBlocks; ++i) {
    net = tape.add(net, n.dense(c, "dec.fc_c" + std::to_string(i)));
    net = n.res_fc(net, "dec.block" + std::to_string(i), false);
  }
  return n.dense(tape.relu(net), "dec.out");
}

template ModelParamsT<float> init_params<float>(const ModelConfig&, std::uint64_t);
template ModelParamsT<double> init_params<double>(const ModelConfig&, std::uint64_t);
template Var build_shape_plane<float>(Tape<float>&, ModelParamsT<float>&, const ModelConfig&, const Mat<float>&);
template Var build_shape_plane<double>(Tape<double>&, ModelParamsT<double>&, const ModelConfig&, const Mat<double>&);
template Var build_image_plane<float>(Tape<float>&, ModelParamsT<float>&, const ModelConfig&, const Mat<float>&);
template Var build_image_plane<double>(Tape<double>&, ModelParamsT<double>&, const ModelConfig&, const Mat<double>&);
template Var build_decoder<float>(Tape<float>&, ModelParamsT<float>&, const ModelConfig&, Var, Var, const Mat<float>&);
template Var build_decoder<double>(Tape<double>&, ModelParamsT<double>&, const ModelConfig&, Var, Var,
                                   const Mat<double>&);

// ---------------------------------------------------------------------------------------
// Inference wrapper

OccupancyNetwork::OccupancyNetwork(ModelConfig cfg, ModelParams params) : cfg_(std::move(cfg)), params_(std::move(params)) {
  const Layout L = make_layout(cfg_);
  if (L.slots.size() != params_.size()) throw InvalidArgument("parameter set does not match the model configuration");
  for (std::size_t i = 0; i < L.slots.size(); ++i) {
    const auto& p = params_.all()[i];
    if (p.name != L.slots[i].name || p.value.rows() != L.slots[i].rows || p.value.cols() != L.slots[i].cols)
      throw InvalidArgument("parameter " + p.name + " does not match the model configuration");
  }
}

EncodedWindow OccupancyNetwork::encode(const Mat<float>& points, const Mat<float>& images) const {
  Tape<float> tape(false);
  EncodedWindow out;
  ++shape_calls_;
  out.psi = tape.value(build_shape_plane(tape, params_, cfg_, points));
  if (cfg_.variant != Variant::Zero) {
    ++image_calls_;
    out.xi = tape.value(build_image_plane(tape, params_, cfg_, images));
  }
  return out;
}

std::vector<float> OccupancyNetwork::decode(const EncodedWindow& planes, const Mat<float>& queries) const {
  Tape<float> tape(false);
  const Var psi = tape.constant(planes.psi, cfg_.psi_res, cfg_.psi_res);
  const Var xi = planes.xi.size() ? tape.constant(planes.xi, cfg_.xi_res, cfg_.xi_res) : Var{};
  const auto& logits = tape.value(build_decoder(tape, params_, cfg_, psi, xi, queries));
  std::vector<float> p(static_cast<std::size_t>(logits.rows()));
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double l = logits(static_cast<Eigen::Index>(i), 0);
    const double s = l >= 0 ? 1.0 / (1.0 + std::exp(-l)) : std::exp(l) / (1.0 + std::exp(l));
    p[i] = static_cast<float>(std::clamp(s, 1e-7, 1.0 - 1e-7));  // keep float results inside (0,1)
  }
  return p;
}

FeaturePlane to_feature_plane(const Mat<float>& plane, int res, const PatchWindow& window) {
  if (plane.cols() != static_cast<Eigen::Index>(res) * res) throw InvalidArgument("plane size does not match res");
  FeaturePlane fp(PlaneGeometry{window.origin, window.side / res, res, res}, static_cast<int>(plane.rows()));
  std::copy(plane.data(), plane.data() + plane.size(), fp.data.begin());
  return fp;
}

}  // namespace implicity
