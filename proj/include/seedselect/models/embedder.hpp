#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "seedselect/io/checkpoint.hpp"
#include "seedselect/io/metadata.hpp"
#include "seedselect/models/conv_encoder.hpp"
#include "seedselect/nn/batch.hpp"

namespace seedselect::models {

struct EmbedderConfig {
  Index image_size = 32;
  Index channels = 3;
  Index width = 16;
  Index embed_dim = 64;

  void to_meta(io::Metadata& m) const;
  static EmbedderConfig from_meta(const io::Metadata& m);
};

/// Semantic embedder: unit-norm D-dimensional vectors.
template <typename S>
class Embedder {
 public:
  explicit Embedder(EmbedderConfig config = {}, std::uint64_t seed = 0);

  /// [N, C, H, W] -> [N, D] with unit rows.
  Var<S> embed(const Var<S>& images) const;

  const EmbedderConfig& config() const { return config_; }
  nn::ParameterSet<S>& params() { return params_; }
  const nn::ParameterSet<S>& params() const { return params_; }

  /// Set by training or loading; embed() refuses to run before that.
  bool ready() const { return ready_; }
  /// Accept the current (e.g. random) weights as usable.
  void mark_ready() { ready_ = true; }

  io::Metadata& training_metadata() { return training_meta_; }
  io::Checkpoint to_checkpoint() const;
  static Embedder from_checkpoint(const io::Checkpoint& ckpt);

  template <typename T>
  Embedder<T> cast() const {
    Embedder<T> out(config_);
    out.params().copy_from(params_);
    out.params().set_trainable(params_.trainable());
    if (ready_) out.mark_ready();
    return out;
  }

 private:
  EmbedderConfig config_;
  nn::ParameterSet<S> params_;
  ConvEncoder<S> encoder_;
  io::Metadata training_meta_;
  bool ready_ = false;
};

/// Embeddings of a whole image set, [N, D].
template <typename S>
Tensor<S> embed_all(const Embedder<S>& model, const Tensor<float>& images, Index batch = 128);

/// Arithmetic mean of the embeddings of [k, C, H, W] images (not re-normalized).
template <typename S>
Tensor<S> centroid(const Embedder<S>& model, const Tensor<float>& images);

/// Mean of precomputed [k, D] embedding rows.
template <typename S>
Tensor<S> centroid_of_rows(const Tensor<S>& embeddings);

/// Class id -> centroid.
template <typename S>
using CentroidTable = std::map<Index, Tensor<S>>;

/// Supervised contrastive loss of unit rows [N, D] at temperature tau.
template <typename S>
Var<S> supcon_loss(const Var<S>& embeddings, const std::vector<Index>& labels, double temperature);

struct EmbedderTrainConfig {
  int epochs = 12;
  int steps_per_epoch = 50;
  Index per_class = 8;
  double learning_rate = 2e-3;
  double temperature = 0.1;
  Index max_shift = 2;
  std::uint64_t seed = 0;
};

struct EmbedderTrainLog {
  std::vector<double> epoch_losses;
};

/// Class-balanced supervised contrastive training.
template <typename S>
EmbedderTrainLog train_embedder(Embedder<S>& model, const nn::LabeledImages& data, const EmbedderTrainConfig& cfg);

/// Accuracy of a softmax-regression probe trained on frozen embeddings.
template <typename S>
double linear_probe_accuracy(const Embedder<S>& model, const nn::LabeledImages& train, const nn::LabeledImages& test,
                             int epochs = 200, std::uint64_t seed = 0);

}  // namespace seedselect::models
