#pragma once

#include <vector>

#include "seedselect/models/classifier.hpp"

namespace seedselect::eval {

struct MixConfig {
  models::ClassifierConfig model;
  models::ClassifierTrainConfig train;
  std::uint64_t init_seed = 0;
};

struct AugmentationResult {
  double balanced_accuracy = 0.0;
  std::vector<double> per_class;
  ad::Index real_size = 0, synthetic_size = 0;
};

/// Trains a fresh classifier on the real few-shot set, adding a 1:1
/// synthetic batch loss per step when `generated` is non-empty, and scores
/// it on the balanced test set.
AugmentationResult augmentation_eval(const nn::LabeledImages& few_shot_real, const nn::LabeledImages* generated,
                                     const nn::LabeledImages& test, const MixConfig& cfg);

/// First `shots` rows of each class.
nn::LabeledImages few_shot_subset(const nn::LabeledImages& data, ad::Index shots);

}  // namespace seedselect::eval
