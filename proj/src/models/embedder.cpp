#include "seedselect/models/embedder.hpp"

#include <cmath>

#include "seedselect/autodiff/adam.hpp"
#include "seedselect/core/log.hpp"

namespace seedselect::models {

void EmbedderConfig::to_meta(io::Metadata& m) const {
  io::put_meta(m, "embedder.image_size", image_size);
  io::put_meta(m, "embedder.channels", channels);
  io::put_meta(m, "embedder.width", width);
  io::put_meta(m, "embedder.embed_dim", embed_dim);
}

EmbedderConfig EmbedderConfig::from_meta(const io::Metadata& m) {
  EmbedderConfig c;
  c.image_size = io::meta_long(m, "embedder.image_size");
  c.channels = io::meta_long(m, "embedder.channels");
  c.width = io::meta_long(m, "embedder.width");
  c.embed_dim = io::meta_long(m, "embedder.embed_dim");
  return c;
}

template <typename S>
Embedder<S>::Embedder(EmbedderConfig config, std::uint64_t seed) : config_(config) {
  Rng rng(seed);
  const Index w = config_.width;
  encoder_ = ConvEncoder<S>(params_, "embedder", config_.image_size, config_.channels, w, 2 * w, 2 * w,
                            config_.embed_dim, rng);
}

template <typename S>
Var<S> Embedder<S>::embed(const Var<S>& images) const {
  if (!ready_) throw std::logic_error("embedder has no trained or loaded weights");
  return ad::l2_normalize_rows(encoder_(images));
}

template <typename S>
io::Checkpoint Embedder<S>::to_checkpoint() const {
  io::Checkpoint ckpt;
  ckpt.metadata = training_meta_;
  ckpt.metadata["model"] = "embedder";
  config_.to_meta(ckpt.metadata);
  ckpt.add_tensors(params_.tensors(), params_.names());
  return ckpt;
}

template <typename S>
Embedder<S> Embedder<S>::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.meta("model") != "embedder") throw FormatError("checkpoint holds a " + ckpt.meta("model") + ", not an embedder");
  Embedder<S> m(EmbedderConfig::from_meta(ckpt.metadata));
  m.params().assign(ckpt.tensors_as<S>());
  m.params().set_trainable(false);
  m.mark_ready();
  return m;
}

template <typename S>
Tensor<S> embed_all(const Embedder<S>& model, const Tensor<float>& images, Index batch) {
  const Index n = images.dim(0), d = model.config().embed_dim;
  Tensor<S> out({n, d});
  for (Index start = 0; start < n; start += batch) {
    const Index end = std::min(n, start + batch);
    std::vector<Index> rows;
    for (Index i = start; i < end; ++i) rows.push_back(i);
    auto e = model.embed(Var<S>::constant(nn::gather(images, rows).template cast<S>()));
    std::copy_n(e.value().ptr(), (end - start) * d, out.ptr() + start * d);
  }
  return out;
}

template <typename S>
Tensor<S> centroid_of_rows(const Tensor<S>& embeddings) {
  if (embeddings.rank() != 2) throw ShapeError("centroid needs [k, D] rows, got " + shape_string(embeddings.shape()));
  const Index k = embeddings.dim(0), d = embeddings.dim(1);
  Tensor<S> out({d});
  const auto m = embeddings.matrix(k, d);
  for (Index j = 0; j < d; ++j) {
    // Fixed-order summation keeps the mean bit-reproducible.
    S acc = 0;
    for (Index i = 0; i < k; ++i) acc += m(i, j);
    out[j] = acc / static_cast<S>(k);
  }
  return out;
}

template <typename S>
Tensor<S> centroid(const Embedder<S>& model, const Tensor<float>& images) {
  if (images.rank() != 4 || images.dim(0) < 1) {
    throw std::invalid_argument("centroid needs at least one image");
  }
  return centroid_of_rows(embed_all(model, images));
}

template <typename S>
Var<S> supcon_loss(const Var<S>& embeddings, const std::vector<Index>& labels, double temperature) {
  const Index n = embeddings.dim(0);
  if (static_cast<Index>(labels.size()) != n) throw ShapeError("supcon: labels do not match batch size");
  auto sim = ad::scale(ad::matmul(embeddings, ad::transpose(embeddings)), static_cast<S>(1.0 / temperature));
  Tensor<S> self_mask({n, n});
  Tensor<S> positives({n, n});
  Index anchors = 0;
  for (Index i = 0; i < n; ++i) {
    self_mask[i * n + i] = S(-1e4);
    Index p = 0;
    for (Index j = 0; j < n; ++j) p += (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]);
    if (p == 0) continue;
    ++anchors;
    for (Index j = 0; j < n; ++j) {
      if (j != i && labels[static_cast<std::size_t>(j)] == labels[static_cast<std::size_t>(i)]) {
        positives[i * n + j] = S(1) / static_cast<S>(p);
      }
    }
  }
  if (anchors == 0) throw std::invalid_argument("supcon: batch has no positive pairs");
  auto logp = ad::log_softmax(ad::add(sim, Var<S>::constant(std::move(self_mask))));
  return ad::scale(ad::sum(ad::mul(logp, Var<S>::constant(std::move(positives)))), static_cast<S>(-1.0 / anchors));
}

template <typename S>
EmbedderTrainLog train_embedder(Embedder<S>& model, const nn::LabeledImages& data, const EmbedderTrainConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("train_embedder: empty dataset");
  std::vector<std::vector<Index>> members;
  for (Index c = 0; c < data.n_classes; ++c) members.push_back(data.indices_of(c));
  model.params().set_trainable(true);
  model.mark_ready();
  Rng rng(cfg.seed);
  ad::Adam<S> opt(model.params().vars(), ad::AdamConfig{cfg.learning_rate});
  EmbedderTrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    double total = 0.0;
    for (int step = 0; step < cfg.steps_per_epoch; ++step) {
      const auto rows = balanced_batch(members, cfg.per_class, rng);
      std::vector<Index> labels;
      for (Index r : rows) labels.push_back(data.labels[static_cast<std::size_t>(r)]);
      auto x = nn::augment_images(nn::gather(data.images, rows), cfg.max_shift, false, rng);
      auto loss = supcon_loss(model.embed(Var<S>::constant(x.template cast<S>())), labels, cfg.temperature);
      const double l = static_cast<double>(loss.item());
      if (!std::isfinite(l)) throw NumericError("embedder loss became non-finite at epoch " + std::to_string(epoch + 1));
      opt.step(ad::backward(loss, model.params().vars()));
      total += l;
    }
    log.epoch_losses.push_back(total / cfg.steps_per_epoch);
    log::info("embedder epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(log.epoch_losses.back()));
  }
  model.params().set_trainable(false);
  auto& meta = model.training_metadata();
  io::put_meta(meta, "train.epochs", cfg.epochs);
  io::put_meta(meta, "train.temperature", cfg.temperature);
  io::put_meta(meta, "train.seed", cfg.seed);
  meta["train.epoch_losses"] = io::join_doubles(log.epoch_losses);
  return log;
}

template <typename S>
double linear_probe_accuracy(const Embedder<S>& model, const nn::LabeledImages& train, const nn::LabeledImages& test,
                             int epochs, std::uint64_t seed) {
  if (test.size() == 0) throw std::invalid_argument("linear probe: empty test set");
  Rng rng(seed);
  const auto rows = nn::balanced_sample(train, 100, rng);
  std::vector<Index> labels;
  for (Index r : rows) labels.push_back(train.labels[static_cast<std::size_t>(r)]);
  const auto feats = Var<double>::constant(embed_all(model, nn::gather(train.images, rows)).template cast<double>());
  nn::ParameterSet<double> params;
  nn::Linear<double> probe(params, "probe", model.config().embed_dim, train.n_classes, rng);
  ad::Adam<double> opt(params.vars(), ad::AdamConfig{0.05});
  for (int e = 0; e < epochs; ++e) {
    auto loss = ad::cross_entropy(probe(feats), labels);
    opt.step(ad::backward(loss, params.vars()));
  }
  const auto logits = probe(Var<double>::constant(embed_all(model, test.images).template cast<double>())).value();
  Index correct = 0;
  const Index k = train.n_classes;
  for (Index i = 0; i < test.size(); ++i) {
    Index best = 0;
    for (Index c = 1; c < k; ++c) best = logits[i * k + c] > logits[i * k + best] ? c : best;
    correct += best == test.labels[static_cast<std::size_t>(i)];
  }
  return static_cast<double>(correct) / static_cast<double>(test.size());
}

#define SEEDSELECT_INSTANTIATE(S)                                                                              \
  template class Embedder<S>;                                                                                  \
  template Tensor<S> embed_all(const Embedder<S>&, const Tensor<float>&, Index);                               \
  template Tensor<S> centroid_of_rows(const Tensor<S>&);                                                       \
  template Tensor<S> centroid(const Embedder<S>&, const Tensor<float>&);                                       \
  template Var<S> supcon_loss(const Var<S>&, const std::vector<Index>&, double);                               \
  template EmbedderTrainLog train_embedder(Embedder<S>&, const nn::LabeledImages&, const EmbedderTrainConfig&); \
  template double linear_probe_accuracy(const Embedder<S>&, const nn::LabeledImages&, const nn::LabeledImages&, \
                                        int, std::uint64_t);
SEEDSELECT_INSTANTIATE(float)
SEEDSELECT_INSTANTIATE(double)
#undef SEEDSELECT_INSTANTIATE

}  // namespace seedselect::models
