#include "seedselect/eval/augmentation.hpp"

#include <stdexcept>

namespace seedselect::eval {

AugmentationResult augmentation_eval(const nn::LabeledImages& few_shot_real, const nn::LabeledImages* generated,
                                     const nn::LabeledImages& test, const MixConfig& cfg) {
  if (test.size() == 0) throw std::invalid_argument("augmentation_eval: empty test set");
  if (few_shot_real.size() == 0) throw std::invalid_argument("augmentation_eval: empty real training set");
  models::ClassifierConfig mc = cfg.model;
  mc.n_classes = few_shot_real.n_classes;
  models::Classifier<float> clf(mc, cfg.init_seed);
  models::train_classifier(clf, few_shot_real, cfg.train, generated);
  AugmentationResult r;
  r.per_class = models::per_class_accuracy(clf, test);
  r.balanced_accuracy = models::balanced_accuracy(r.per_class);
  r.real_size = few_shot_real.size();
  r.synthetic_size = generated ? generated->size() : 0;
  return r;
}

nn::LabeledImages few_shot_subset(const nn::LabeledImages& data, ad::Index shots) {
  if (shots <= 0) throw std::invalid_argument("shots must be positive");
  std::vector<ad::Index> rows;
  for (ad::Index c = 0; c < data.n_classes; ++c) {
    const auto members = data.indices_of(c);
    if (static_cast<ad::Index>(members.size()) < shots) {
      throw std::invalid_argument("class " + std::to_string(c) + " has fewer than " + std::to_string(shots) +
                                  " images");
    }
    rows.insert(rows.end(), members.begin(), members.begin() + shots);
  }
  nn::LabeledImages out;
  out.images = nn::gather(data.images, rows);
  for (auto r : rows) out.labels.push_back(data.labels[static_cast<std::size_t>(r)]);
  out.n_classes = data.n_classes;
  return out;
}

}  // namespace seedselect::eval
