#pragma once

#include <cstdint>
#include <vector>

#include "seedselect/io/checkpoint.hpp"
#include "seedselect/io/metadata.hpp"
#include "seedselect/models/conv_encoder.hpp"
#include "seedselect/nn/batch.hpp"

namespace seedselect::models {

struct ClassifierConfig {
  Index image_size = 32;
  Index channels = 3;
  Index width = 32;
  Index n_classes = 12;

  void to_meta(io::Metadata& m) const;
  static ClassifierConfig from_meta(const io::Metadata& m);
};

template <typename S>
class Classifier {
 public:
  explicit Classifier(ClassifierConfig config = {}, std::uint64_t seed = 0);

  Var<S> logits(const Var<S>& images) const;
  /// Softmax over classes, rows sum to 1.
  Var<S> classify(const Var<S>& images) const;

  const ClassifierConfig& config() const { return config_; }
  nn::ParameterSet<S>& params() { return params_; }
  const nn::ParameterSet<S>& params() const { return params_; }

  bool ready() const { return ready_; }
  void mark_ready() { ready_ = true; }

  io::Metadata& training_metadata() { return training_meta_; }
  io::Checkpoint to_checkpoint() const;
  static Classifier from_checkpoint(const io::Checkpoint& ckpt);

 private:
  ClassifierConfig config_;
  nn::ParameterSet<S> params_;
  ConvEncoder<S> encoder_;
  io::Metadata training_meta_;
  bool ready_ = false;
};

struct ClassifierTrainConfig {
  int epochs = 14;
  int steps_per_epoch = 50;
  Index per_class = 8;  // rows per class in each balanced batch
  double learning_rate = 2e-3;
  Index max_shift = 2;
  bool flip = true;
  std::uint64_t seed = 0;
};

struct ClassifierTrainLog {
  std::vector<double> epoch_losses;
};

/// Training on class-balanced batches. When `synthetic` is given and
/// non-empty, every step adds the loss of an equally sized balanced batch of
/// synthetic images (1:1 sum). Synthetic sampling uses its own random stream,
/// so an empty synthetic set reproduces the real-only run exactly.
template <typename S>
ClassifierTrainLog train_classifier(Classifier<S>& model, const nn::LabeledImages& real,
                                    const ClassifierTrainConfig& cfg, const nn::LabeledImages* synthetic = nullptr);

/// Argmax labels of an image set.
template <typename S>
std::vector<Index> predict_labels(const Classifier<S>& model, const Tensor<float>& images, Index batch = 128);

/// Per-class accuracy on a labeled set (classes without samples get NaN).
template <typename S>
std::vector<double> per_class_accuracy(const Classifier<S>& model, const nn::LabeledImages& data);

/// Mean of the per-class accuracies.
double balanced_accuracy(const std::vector<double>& per_class);

}  // namespace seedselect::models
