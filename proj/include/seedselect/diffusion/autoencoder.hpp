#pragma once

#include <cstdint>

#include "seedselect/io/checkpoint.hpp"
#include "seedselect/io/metadata.hpp"
#include "seedselect/nn/batch.hpp"
#include "seedselect/nn/layers.hpp"

namespace seedselect::diffusion {

using ad::Index;
using ad::Tensor;
using ad::Var;

struct AutoencoderConfig {
  Index image_size = 32;
  Index image_channels = 3;
  Index latent_channels = 4;
  Index width = 16;       // channels at full and half resolution
  Index wide_width = 32;  // channels at quarter resolution

  Index latent_size() const { return image_size / 4; }
  ad::Shape image_shape(Index n = 1) const { return {n, image_channels, image_size, image_size}; }
  ad::Shape latent_shape(Index n = 1) const { return {n, latent_channels, latent_size(), latent_size()}; }

  void to_meta(io::Metadata& m) const;
  static AutoencoderConfig from_meta(const io::Metadata& m);
};

/// Deterministic convolutional autoencoder mapping [N, 3, 32, 32] images to
/// [N, 4, 8, 8] latents. Latents are multiplied by a fixed scale (set after
/// training) so they have roughly unit variance.
template <typename S>
class Autoencoder {
 public:
  explicit Autoencoder(AutoencoderConfig config = {}, std::uint64_t seed = 0);

  Var<S> encode(const Var<S>& images) const;
  /// Output clamped to [0, 1].
  Var<S> decode(const Var<S>& latents) const;

  Var<S> encode_unscaled(const Var<S>& images) const;
  Var<S> decode_unscaled(const Var<S>& latents) const;

  const AutoencoderConfig& config() const { return config_; }
  double latent_scale() const { return latent_scale_; }
  void set_latent_scale(double s) { latent_scale_ = s; }

  nn::ParameterSet<S>& params() { return params_; }
  const nn::ParameterSet<S>& params() const { return params_; }

  io::Checkpoint to_checkpoint() const;
  static Autoencoder from_checkpoint(const io::Checkpoint& ckpt);

  template <typename T>
  Autoencoder<T> cast() const {
    Autoencoder<T> out(config_);
    out.params().copy_from(params_);
    out.set_latent_scale(latent_scale_);
    out.params().set_trainable(params_.trainable());
    return out;
  }

 private:
  void check_shape(const Var<S>& x, const ad::Shape& expected, const char* what) const;

  AutoencoderConfig config_;
  nn::ParameterSet<S> params_;
  nn::Conv2d<S> enc1_, enc2_, enc3_, enc_out_;
  nn::Conv2d<S> dec_in_, dec1_, dec_out_;
  double latent_scale_ = 1.0;
};

struct AutoencoderTrainConfig {
  int epochs = 8;
  Index batch_size = 32;
  double learning_rate = 2e-3;
  std::uint64_t seed = 0;
};

struct TrainLog {
  std::vector<double> epoch_losses;
};

/// Plain MSE reconstruction training; sets the latent scale afterwards.
template <typename S>
TrainLog train_autoencoder(Autoencoder<S>& model, const nn::LabeledImages& data, const AutoencoderTrainConfig& cfg);

/// Encode a whole image set in batches (no gradient tracking).
template <typename S>
Tensor<S> encode_all(const Autoencoder<S>& model, const Tensor<float>& images, Index batch = 64);

template <typename S>
Tensor<S> decode_all(const Autoencoder<S>& model, const Tensor<S>& latents, Index batch = 64);

}  // namespace seedselect::diffusion
