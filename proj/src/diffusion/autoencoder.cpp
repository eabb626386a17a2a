#include "seedselect/diffusion/autoencoder.hpp"

#include <cmath>

#include "seedselect/autodiff/adam.hpp"
#include "seedselect/core/log.hpp"

namespace seedselect::diffusion {

void AutoencoderConfig::to_meta(io::Metadata& m) const {
  io::put_meta(m, "ae.image_size", image_size);
  io::put_meta(m, "ae.image_channels", image_channels);
  io::put_meta(m, "ae.latent_channels", latent_channels);
  io::put_meta(m, "ae.width", width);
  io::put_meta(m, "ae.wide_width", wide_width);
}

AutoencoderConfig AutoencoderConfig::from_meta(const io::Metadata& m) {
  AutoencoderConfig c;
  c.image_size = io::meta_long(m, "ae.image_size");
  c.image_channels = io::meta_long(m, "ae.image_channels");
  c.latent_channels = io::meta_long(m, "ae.latent_channels");
  c.width = io::meta_long(m, "ae.width");
  c.wide_width = io::meta_long(m, "ae.wide_width");
  return c;
}

template <typename S>
Autoencoder<S>::Autoencoder(AutoencoderConfig config, std::uint64_t seed) : config_(config) {
  if (config_.image_size % 4 != 0) throw std::invalid_argument("image size must be divisible by 4");
  Rng rng(seed);
  const Index w = config_.width, ww = config_.wide_width;
  enc1_ = nn::Conv2d<S>(params_, "enc1", config_.image_channels, w, 3, 1, 1, rng);
  enc2_ = nn::Conv2d<S>(params_, "enc2", w, w, 3, 2, 1, rng);
  enc3_ = nn::Conv2d<S>(params_, "enc3", w, ww, 3, 2, 1, rng);
  enc_out_ = nn::Conv2d<S>(params_, "enc_out", ww, config_.latent_channels, 1, 1, 0, rng);
  dec_in_ = nn::Conv2d<S>(params_, "dec_in", config_.latent_channels, ww, 3, 1, 1, rng);
  dec1_ = nn::Conv2d<S>(params_, "dec1", ww, w, 3, 1, 1, rng);
  dec_out_ = nn::Conv2d<S>(params_, "dec_out", w, config_.image_channels, 3, 1, 1, rng);
}

template <typename S>
void Autoencoder<S>::check_shape(const Var<S>& x, const ad::Shape& expected, const char* what) const {
  const auto& s = x.shape();
  bool ok = s.size() == 4;
  for (std::size_t k = 1; ok && k < 4; ++k) ok = s[k] == expected[k];
  if (!ok) {
    throw ShapeError(std::string(what) + " shape " + shape_string(s) + " does not match autoencoder config " +
                     shape_string(expected));
  }
}

template <typename S>
Var<S> Autoencoder<S>::encode_unscaled(const Var<S>& images) const {
  check_shape(images, config_.image_shape(), "image");
  auto h = ad::scale(ad::add_scalar(images, S(-0.5)), S(2));
  h = ad::silu(enc1_(h));
  h = ad::silu(enc2_(h));
  h = ad::silu(enc3_(h));
  return enc_out_(h);
}

template <typename S>
Var<S> Autoencoder<S>::decode_unscaled(const Var<S>& latents) const {
  check_shape(latents, config_.latent_shape(), "latent");
  auto h = ad::silu(dec_in_(latents));
  h = ad::upsample_nearest(h, 2);
  h = ad::silu(dec1_(h));
  h = ad::upsample_nearest(h, 2);
  return ad::clamp(ad::sigmoid(dec_out_(h)), S(0), S(1));
}

template <typename S>
Var<S> Autoencoder<S>::encode(const Var<S>& images) const {
  return ad::scale(encode_unscaled(images), static_cast<S>(latent_scale_));
}

template <typename S>
Var<S> Autoencoder<S>::decode(const Var<S>& latents) const {
  return decode_unscaled(ad::scale(latents, static_cast<S>(1.0 / latent_scale_)));
}

template <typename S>
io::Checkpoint Autoencoder<S>::to_checkpoint() const {
  io::Checkpoint ckpt;
  ckpt.metadata["model"] = "autoencoder";
  config_.to_meta(ckpt.metadata);
  io::put_meta(ckpt.metadata, "ae.latent_scale", latent_scale_);
  ckpt.add_tensors(params_.tensors(), params_.names());
  return ckpt;
}

template <typename S>
Autoencoder<S> Autoencoder<S>::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.meta("model") != "autoencoder") throw FormatError("checkpoint holds a " + ckpt.meta("model") + ", not an autoencoder");
  Autoencoder<S> m(AutoencoderConfig::from_meta(ckpt.metadata));
  m.params().assign(ckpt.tensors_as<S>());
  m.set_latent_scale(io::meta_double(ckpt.metadata, "ae.latent_scale"));
  m.params().set_trainable(false);
  return m;
}

template <typename S>
TrainLog train_autoencoder(Autoencoder<S>& model, const nn::LabeledImages& data, const AutoencoderTrainConfig& cfg) {
  if (data.size() == 0) throw std::invalid_argument("train_autoencoder: empty dataset");
  model.params().set_trainable(true);
  Rng rng(cfg.seed);
  ad::Adam<S> opt(model.params().vars(), ad::AdamConfig{cfg.learning_rate});
  TrainLog log;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = nn::shuffled_range(data.size(), rng);
    double total = 0.0;
    Index batches = 0;
    for (Index start = 0; start < data.size(); start += cfg.batch_size) {
      const Index end = std::min(data.size(), start + cfg.batch_size);
      std::vector<Index> rows(order.begin() + start, order.begin() + end);
      auto x = Var<S>::constant(nn::gather(data.images, rows).template cast<S>());
      auto loss = ad::mse(model.decode_unscaled(model.encode_unscaled(x)), x);
      const double l = static_cast<double>(loss.item());
      if (!std::isfinite(l)) {
        throw NumericError("autoencoder loss became non-finite at epoch " + std::to_string(epoch + 1) + " batch " +
                           std::to_string(batches));
      }
      opt.step(ad::backward(loss, model.params().vars()));
      total += l;
      ++batches;
    }
    log.epoch_losses.push_back(total / static_cast<double>(batches));
    log::info("autoencoder epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(log.epoch_losses.back()));
  }
  model.params().set_trainable(false);

  // Unit-variance latents.
  model.set_latent_scale(1.0);
  const Tensor<S> z = encode_all(model, data.images);
  const double m = static_cast<double>(z.data().mean());
  const double var = static_cast<double>((z.data() - static_cast<S>(m)).square().mean());
  model.set_latent_scale(1.0 / std::sqrt(std::max(var, 1e-12)));
  return log;
}

template <typename S>
Tensor<S> encode_all(const Autoencoder<S>& model, const Tensor<float>& images, Index batch) {
  const Index n = images.dim(0);
  Tensor<S> out(model.config().latent_shape(n));
  const Index per = out.size() / n;
  for (Index start = 0; start < n; start += batch) {
    const Index end = std::min(n, start + batch);
    std::vector<Index> rows;
    for (Index i = start; i < end; ++i) rows.push_back(i);
    auto z = model.encode(Var<S>::constant(nn::gather(images, rows).template cast<S>()));
    std::copy_n(z.value().ptr(), (end - start) * per, out.ptr() + start * per);
  }
  return out;
}

template <typename S>
Tensor<S> decode_all(const Autoencoder<S>& model, const Tensor<S>& latents, Index batch) {
  const Index n = latents.dim(0);
  Tensor<S> out(model.config().image_shape(n));
  const Index per = out.size() / n;
  for (Index start = 0; start < n; start += batch) {
    const Index end = std::min(n, start + batch);
    std::vector<Index> rows;
    for (Index i = start; i < end; ++i) rows.push_back(i);
    auto x = model.decode(Var<S>::constant(nn::gather(latents, rows)));
    std::copy_n(x.value().ptr(), (end - start) * per, out.ptr() + start * per);
  }
  return out;
}

template class Autoencoder<float>;
template class Autoencoder<double>;
template TrainLog train_autoencoder(Autoencoder<float>&, const nn::LabeledImages&, const AutoencoderTrainConfig&);
template TrainLog train_autoencoder(Autoencoder<double>&, const nn::LabeledImages&, const AutoencoderTrainConfig&);
template Tensor<float> encode_all(const Autoencoder<float>&, const Tensor<float>&, Index);
template Tensor<double> encode_all(const Autoencoder<double>&, const Tensor<float>&, Index);
template Tensor<float> decode_all(const Autoencoder<float>&, const Tensor<float>&, Index);
template Tensor<double> decode_all(const Autoencoder<double>&, const Tensor<double>&, Index);

}  // namespace seedselect::diffusion
