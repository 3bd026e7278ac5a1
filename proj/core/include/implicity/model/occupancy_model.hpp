// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "implicity/common/kv_config.hpp"
#include "implicity/geometry/feature_plane.hpp"
#include "implicity/geometry/patch_window.hpp"
#include "implicity/nn/tape.hpp"

namespace implicity {

enum class Variant : std::uint8_t { Zero, Mono, Stereo };

const char* to_string(Variant v);
Variant variant_from_string(const std::string& s);

inline constexpr int kPointBlocks = 5;
inline constexpr int kDecoderBlocks = 5;

struct ModelConfig {
  Variant variant = Variant::Stereo;
  int d = 32;
  int psi_res = 128;          // shape plane is psi_res x psi_res over the window
  int xi_res = 64;            // image plane; the image patch is 4 * xi_res pixels wide
  int unet_depth = 5;         // resolution levels
  int unet_convs = 2;         // 3x3 convolutions per level and direction
  int unet_channel_cap = 8;   // channels at level l are min(d * 2^l, cap * d)
  int hourglass_depth = 4;
  int hourglass_stacks = 1;
  std::uint64_t init_seed = 0;
  // Normalization constants carried with the weights.
  double z_scale = 1.0;
  double image_mean = 0.0;
  double image_std = 1.0;

  int image_res() const { return 4 * xi_res; }
  int image_channels() const { return variant == Variant::Stereo ? 2 : 1; }
  void validate() const;
  static ModelConfig from_kv(const KvConfig& kv) { return from_kv(kv, ModelConfig()); }
  static ModelConfig from_kv(const KvConfig& kv, const ModelConfig& defaults);
  KvConfig to_kv() const;
  /// d=4, 8x8 planes, 32x32 images, shallow U-Net and hourglass.
  static ModelConfig tiny(Variant v);
};

template <class T>
using ModelParamsT = nn::ParamSet<T>;
using ModelParams = nn::ParamSet<float>;

/// Fan-in scaled uniform initialization, deterministic in (cfg, seed). Weights feeding a
/// rectifier use bound sqrt(6/fan_in), other weights sqrt(3/fan_in), biases 1/sqrt(fan_in).
/// The closing weight of every residual branch and the decoder's output weight start at
/// zero. The first image
/// convolution gets identical weights for both input channels.
template <class T>
ModelParamsT<T> init_params(const ModelConfig& cfg, std::uint64_t seed);

/// Graph builders. Points and queries are window-normalized [N x 3]; images are
/// [channels x S*S] with S = cfg.image_res(), row 0 at the window's southern edge.
template <class T>
nn::Var build_shape_plane(nn::Tape<T>& tape, ModelParamsT<T>& params, const ModelConfig& cfg,
                          const nn::Mat<T>& points);
template <class T>
nn::Var build_image_plane(nn::Tape<T>& tape, ModelParamsT<T>& params, const ModelConfig& cfg,
                          const nn::Mat<T>& images);
/// Returns logits [N x 1]; pass a default Var as xi for the zero variant.
template <class T>
nn::Var build_decoder(nn::Tape<T>& tape, ModelParamsT<T>& params, const ModelConfig& cfg, nn::Var psi, nn::Var xi,
                      const nn::Mat<T>& queries);

/// Planes of one window, ready for decoding.
struct EncodedWindow {
  nn::Mat<float> psi;  // [d x psi_res^2]
  nn::Mat<float> xi;   // [d x xi_res^2]; empty for the zero variant
};

/// Frozen network for inference. decode() is const and safe to call concurrently.
class OccupancyNetwork {
 public:
  OccupancyNetwork(ModelConfig cfg, ModelParams params);

  const ModelConfig& config() const { return cfg_; }
  const ModelParams& params() const { return params_; }

  /// images: empty for the zero variant, else image_channels() planes of image_res^2.
  EncodedWindow encode(const nn::Mat<float>& points, const nn::Mat<float>& images) const;
  /// Occupancy probabilities for normalized queries [N x 3].
  std::vector<float> decode(const EncodedWindow& planes, const nn::Mat<float>& queries) const;

  long shape_encoder_calls() const { return shape_calls_.load(); }
  long image_encoder_calls() const { return image_calls_.load(); }
  void reset_counters() const {
    shape_calls_ = 0;
    image_calls_ = 0;
  }

 private:
  ModelConfig cfg_;
  mutable ModelParams params_;  // the tape needs non-const leaves; values are never written
  mutable std::atomic<long> shape_calls_{0};
  mutable std::atomic<long> image_calls_{0};
};

/// The shape plane of an encoded window as a world-aligned FeaturePlane.
FeaturePlane to_feature_plane(const nn::Mat<float>& plane, int res, const PatchWindow& window);

/// Versioned container: "ICKP", u32 version, u32 length + config key=value text,
/// u32 record count, then per record u32 name length, name, u32 ndim, u32 dims,
/// little-endian f32 data.
void save_checkpoint(const std::filesystem::path& path, const ModelConfig& cfg, const ModelParams& params);
/// Validates names and shapes against the echoed config.
std::pair<ModelConfig, ModelParams> load_checkpoint(const std::filesystem::path& path);

}  // namespace implicity
