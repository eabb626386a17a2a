#pragma once

#include <cstdint>
#include <vector>

#include "seedselect/diffusion/schedule.hpp"
#include "seedselect/io/checkpoint.hpp"
#include "seedselect/io/metadata.hpp"
#include "seedselect/nn/layers.hpp"

namespace seedselect::diffusion {

using ad::Index;
using ad::Tensor;
using ad::Var;

struct DenoiserConfig {
  Index latent_channels = 4;
  Index latent_size = 8;
  Index width = 24;
  Index time_dim = 32;
  Index embed_dim = 64;
  Index groups = 8;
  Index n_classes = 12;
  int train_steps = 1000;
  double beta_start = 1e-4;
  double beta_end = 2e-2;

  /// Row of the condition table reserved for the unconditional (null) condition.
  Index null_class() const { return n_classes; }

  void to_meta(io::Metadata& m) const;
  static DenoiserConfig from_meta(const io::Metadata& m);
};

/// Small convolutional encoder-decoder with a skip connection. Timestep and
/// class condition are embedded, summed, and injected into every block as a
/// per-channel scale and shift.
template <typename S>
class Denoiser {
 public:
  explicit Denoiser(DenoiserConfig config = {}, std::uint64_t seed = 0);

  /// Noise prediction for latents [N, C, h, w] at per-row timesteps and conditions.
  Var<S> predict(const Var<S>& z, const std::vector<int>& t, const std::vector<Index>& classes) const;

  /// Classifier-free guidance: eps_u + scale * (eps_c - eps_u). Scale 1 and 0
  /// return the conditional and unconditional predictions exactly.
  Var<S> guided_predict(const Var<S>& z, int t, const std::vector<Index>& classes, double guidance_scale) const;

  const DenoiserConfig& config() const { return config_; }
  const NoiseSchedule& schedule() const { return schedule_; }

  nn::ParameterSet<S>& params() { return params_; }
  const nn::ParameterSet<S>& params() const { return params_; }

  io::Metadata& training_metadata() { return training_meta_; }
  const io::Metadata& training_metadata() const { return training_meta_; }

  io::Checkpoint to_checkpoint() const;
  static Denoiser from_checkpoint(const io::Checkpoint& ckpt);

  template <typename T>
  Denoiser<T> cast() const {
    Denoiser<T> out(config_);
    out.params().copy_from(params_);
    out.params().set_trainable(params_.trainable());
    out.training_metadata() = training_meta_;
    return out;
  }

 private:
  struct Block {
    nn::Conv2d<S> conv1, conv2;
    nn::Linear<S> film;
    Index channels = 0;
  };
  Block make_block(const std::string& name, Index channels, Rng& rng);
  Var<S> run_block(const Block& b, const Var<S>& x, const Var<S>& emb) const;
  Var<S> modulate(const Var<S>& h, const Var<S>& film, Index channels) const;
  Var<S> embed(const std::vector<int>& t, const std::vector<Index>& classes) const;

  DenoiserConfig config_;
  NoiseSchedule schedule_;
  nn::ParameterSet<S> params_;
  nn::Linear<S> time1_, time2_;
  Var<S> class_table_;
  nn::Conv2d<S> conv_in_, down_, up_, conv_out_;
  Block block1_, block2_, block3_;
  nn::Linear<S> up_film_;
  io::Metadata training_meta_;
};

/// Sinusoidal features [N, dim] for integer timesteps.
template <typename S>
Tensor<S> timestep_features(const std::vector<int>& t, Index dim);

struct DenoiserTrainConfig {
  int epochs = 40;
  Index batch_size = 64;
  double learning_rate = 2e-3;
  double p_uncond = 0.1;
  std::uint64_t seed = 0;
};

struct DenoiserTrainLog {
  std::vector<double> epoch_losses;
};

/// Noise-prediction training on pre-encoded latents; each row's condition is
/// replaced by the null condition with probability p_uncond.
template <typename S>
DenoiserTrainLog train_denoiser(Denoiser<S>& model, const Tensor<S>& latents, const std::vector<Index>& labels,
                                const DenoiserTrainConfig& cfg);

}  // namespace seedselect::diffusion
