#include "seedselect/models/classifier.hpp"

#include <cmath>
#include <limits>

#include "seedselect/autodiff/adam.hpp"
#include "seedselect/core/log.hpp"

namespace seedselect::models {

void ClassifierConfig::to_meta(io::Metadata& m) const {
  io::put_meta(m, "classifier.image_size", image_size);
  io::put_meta(m, "classifier.channels", channels);
  io::put_meta(m, "classifier.width", width);
  io::put_meta(m, "classifier.n_classes", n_classes);
}

ClassifierConfig ClassifierConfig::from_meta(const io::Metadata& m) {
  ClassifierConfig c;
  c.image_size = io::meta_long(m, "classifier.image_size");
  c.channels = io::meta_long(m, "classifier.channels");
  c.width = io::meta_long(m, "classifier.width");
  c.n_classes = io::meta_long(m, "classifier.n_classes");
  return c;
}

template <typename S>
Classifier<S>::Classifier(ClassifierConfig config, std::uint64_t seed) : config_(config) {
  Rng rng(seed);
  const Index w = config_.width;
  encoder_ = ConvEncoder<S>(params_, "classifier", config_.image_size, config_.channels, w, 2 * w, 2 * w,
                            config_.n_classes, rng);
}

template <typename S>
Var<S> Classifier<S>::logits(const Var<S>& images) const {
  if (!ready_) throw std::logic_error("classifier has no trained or loaded weights");
  return encoder_(images);
}

template <typename S>
Var<S> Classifier<S>::classify(const Var<S>& images) const {
  return ad::softmax(logits(images));
}

template <typename S>
io::Checkpoint Classifier<S>::to_checkpoint() const {
  io::Checkpoint ckpt;
  ckpt.metadata = training_meta_;
  ckpt.metadata["model"] = "classifier";
  config_.to_meta(ckpt.metadata);
  ckpt.add_tensors(params_.tensors(), params_.names());
  return ckpt;
}

template <typename S>
Classifier<S> Classifier<S>::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.meta("model") != "classifier") {
    throw FormatError("checkpoint holds a " + ckpt.meta("model") + ", not a classifier");
  }
  Classifier<S> m(ClassifierConfig::from_meta(ckpt.metadata));
  m.params().assign(ckpt.tensors_as<S>());
  m.params().set_trainable(false);
  m.mark_ready();
  return m;
}

namespace {

std::vector<std::vector<Index>> members_of(const nn::LabeledImages& data) {
  std::vector<std::vector<Index>> out;
  for (Index c = 0; c < data.n_classes; ++c) out.push_back(data.indices_of(c));
  return out;
}

std::vector<Index> labels_of(const nn::LabeledImages& data, const std::vector<Index>& rows) {
  std::vector<Index> out;
  for (Index r : rows) out.push_back(data.labels[static_cast<std::size_t>(r)]);
  return out;
}

}  // namespace

template <typename S>
ClassifierTrainLog train_classifier(Classifier<S>& model, const nn::LabeledImages& real,
                                    const ClassifierTrainConfig& cfg, const nn::LabeledImages* synthetic) {
  if (real.size() == 0) throw std::invalid_argument("train_classifier: empty dataset");
  const bool mix = synthetic != nullptr && synthetic->size() > 0;
  const auto real_members = members_of(real);
  const auto syn_members = mix ? members_of(*synthetic) : std::vector<std::vector<Index>>{};
  model.params().set_trainable(true);
  model.mark_ready();
  Rng rng(cfg.seed);
  Rng syn_rng(Rng::mix(cfg.seed, 1));
  ad::Adam<S> opt(model.params().vars(), ad::AdamConfig{cfg.learning_rate});
  ClassifierTrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const auto rows = balanced_batch(real_members, cfg.per_class, rng);
      auto x = nn::augment_images(nn::gather(real.images, rows), cfg.max_shift, cfg.flip, rng);
      auto loss = ad::cross_entropy(model.logits(Var<S>::constant(x.template cast<S>())), labels_of(real, rows));
      if (mix) {
        const auto srows = balanced_batch(syn_members, cfg.per_class, syn_rng);
        auto sx = nn::augment_images(nn::gather(synthetic->images, srows), cfg.max_shift, cfg.flip, syn_rng);
        loss = ad::add(loss, ad::cross_entropy(model.logits(Var<S>::constant(sx.template cast<S>())),
                                               labels_of(*synthetic, srows)));
      }
      const double l = static_cast<double>(loss.item());
      if (!std::isfinite(l)) throw NumericError("classifier loss became non-finite at epoch " + std::to_string(epoch + 1));
      opt.step(ad::backward(loss, model.params().vars()));
      total += l;
    }
    log.epoch_losses.push_back(total / cfg.steps_per_epoch);
    log::debug("classifier epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(log.epoch_losses.back()));
  }
  model.params().set_trainable(false);
  auto& meta = model.training_metadata();
  io::put_meta(meta, "train.epochs", cfg.epochs);
  io::put_meta(meta, "train.seed", cfg.seed);
  io::put_meta(meta, "train.balanced", "1");
  meta["train.epoch_losses"] = io::join_doubles(log.epoch_losses);
  return log;
}

template <typename S>
std::vector<Index> predict_labels(const Classifier<S>& model, const Tensor<float>& images, Index batch) {
  const Index n = images.dim(0), k = model.config().n_classes;
  std::vector<Index> out;
  out.reserve(static_cast<std::size_t>(n));
  for (Index start = 0; start < n; start += batch) {
    const Index end = std::min(n, start + batch);
    std::vector<Index> rows;
    for (Index i = start; i < end; ++i) rows.push_back(i);
    const auto logits = model.logits(Var<S>::constant(nn::gather(images, rows).template cast<S>())).value();
    for (Index i = 0; i < end - start; ++i) {
      Index best = 0;
      for (Index c = 1; c < k; ++c) best = logits[i * k + c] > logits[i * k + best] ? c : best;
      out.push_back(best);
    }
  }
  return out;
}

template <typename S>
std::vector<double> per_class_accuracy(const Classifier<S>& model, const nn::LabeledImages& data) {
  const auto pred = predict_labels(model, data.images);
  std::vector<double> hit(static_cast<std::size_t>(data.n_classes), 0.0), count(hit.size(), 0.0);
  for (Index i = 0; i < data.size(); ++i) {
    const auto c = static_cast<std::size_t>(data.labels[static_cast<std::size_t>(i)]);
    count[c] += 1.0;
    hit[c] += pred[static_cast<std::size_t>(i)] == data.labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;
  }
  for (std::size_t c = 0; c < hit.size(); ++c) {
    hit[c] = count[c] > 0 ? hit[c] / count[c] : std::numeric_limits<double>::quiet_NaN();
  }
  return hit;
}

double balanced_accuracy(const std::vector<double>& per_class) {
  double total = 0.0;
  int n = 0;
  for (double a : per_class) {
    if (std::isnan(a)) continue;
    total += a;
    ++n;
  }
  if (n == 0) throw std::invalid_argument("balanced accuracy of an empty evaluation");
  return total / n;
}

#define SEEDSELECT_INSTANTIATE(S)                                                                                 \
  template class Classifier<S>;                                                                                   \
  template ClassifierTrainLog train_classifier(Classifier<S>&, const nn::LabeledImages&,                          \
                                               const ClassifierTrainConfig&, const nn::LabeledImages*);           \
  template std::vector<Index> predict_labels(const Classifier<S>&, const Tensor<float>&, Index);                  \
  template std::vector<double> per_class_accuracy(const Classifier<S>&, const nn::LabeledImages&);
SEEDSELECT_INSTANTIATE(float)
SEEDSELECT_INSTANTIATE(double)
#undef SEEDSELECT_INSTANTIATE

}  // namespace seedselect::models
