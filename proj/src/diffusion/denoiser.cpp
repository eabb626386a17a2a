#include "seedselect/diffusion/denoiser.hpp"

#include <cmath>

#include "seedselect/autodiff/adam.hpp"
#include "seedselect/core/log.hpp"
#include "seedselect/nn/batch.hpp"

namespace seedselect::diffusion {

void DenoiserConfig::to_meta(io::Metadata& m) const {
  io::put_meta(m, "ddpm.latent_channels", latent_channels);
  io::put_meta(m, "ddpm.latent_size", latent_size);
  io::put_meta(m, "ddpm.width", width);
  io::put_meta(m, "ddpm.time_dim", time_dim);
  io::put_meta(m, "ddpm.embed_dim", embed_dim);
  io::put_meta(m, "ddpm.groups", groups);
  io::put_meta(m, "ddpm.n_classes", n_classes);
  io::put_meta(m, "ddpm.train_steps", train_steps);
  io::put_meta(m, "ddpm.beta_start", beta_start);
  io::put_meta(m, "ddpm.beta_end", beta_end);
}

DenoiserConfig DenoiserConfig::from_meta(const io::Metadata& m) {
  DenoiserConfig c;
  c.latent_channels = io::meta_long(m, "ddpm.latent_channels");
  c.latent_size = io::meta_long(m, "ddpm.latent_size");
  c.width = io::meta_long(m, "ddpm.width");
  c.time_dim = io::meta_long(m, "ddpm.time_dim");
  c.embed_dim = io::meta_long(m, "ddpm.embed_dim");
  c.groups = io::meta_long(m, "ddpm.groups");
  c.n_classes = io::meta_long(m, "ddpm.n_classes");
  c.train_steps = static_cast<int>(io::meta_long(m, "ddpm.train_steps"));
  c.beta_start = io::meta_double(m, "ddpm.beta_start");
  c.beta_end = io::meta_double(m, "ddpm.beta_end");
  return c;
}

template <typename S>
Tensor<S> timestep_features(const std::vector<int>& t, Index dim) {
  Tensor<S> out({static_cast<Index>(t.size()), dim});
  const Index half = dim / 2;
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (Index k = 0; k < half; ++k) {
      const double freq = std::exp(-std::log(10000.0) * static_cast<double>(k) / static_cast<double>(half));
      const double arg = static_cast<double>(t[i]) * freq;
      out[static_cast<Index>(i) * dim + k] = static_cast<S>(std::sin(arg));
      out[static_cast<Index>(i) * dim + half + k] = static_cast<S>(std::cos(arg));
    }
  }
  return out;
}

template <typename S>
Denoiser<S>::Denoiser(DenoiserConfig config, std::uint64_t seed)
    : config_(config), schedule_(config.train_steps, config.beta_start, config.beta_end) {
  Rng rng(seed);
  const Index c = config_.width, e = config_.embed_dim;
  time1_ = nn::Linear<S>(params_, "time1", config_.time_dim, e, rng);
  time2_ = nn::Linear<S>(params_, "time2", e, e, rng);
  Tensor<S> table({config_.n_classes + 1, e});
  for (Index i = 0; i < table.size(); ++i) table[i] = static_cast<S>(rng.normal() * 0.5);
  class_table_ = params_.add("class_table", std::move(table));
  conv_in_ = nn::Conv2d<S>(params_, "conv_in", config_.latent_channels, c, 3, 1, 1, rng);
  block1_ = make_block("block1", c, rng);
  down_ = nn::Conv2d<S>(params_, "down", c, 2 * c, 3, 2, 1, rng);
  block2_ = make_block("block2", 2 * c, rng);
  up_ = nn::Conv2d<S>(params_, "up", 3 * c, c, 3, 1, 1, rng);
  up_film_ = nn::Linear<S>(params_, "up_film", e, 2 * c, rng);
  block3_ = make_block("block3", c, rng);
  conv_out_ = nn::Conv2d<S>(params_, "conv_out", c, config_.latent_channels, 3, 1, 1, rng);
}

template <typename S>
typename Denoiser<S>::Block Denoiser<S>::make_block(const std::string& name, Index channels, Rng& rng) {
  Block b;
  b.channels = channels;
  b.conv1 = nn::Conv2d<S>(params_, name + ".conv1", channels, channels, 3, 1, 1, rng);
  b.film = nn::Linear<S>(params_, name + ".film", config_.embed_dim, 2 * channels, rng);
  b.conv2 = nn::Conv2d<S>(params_, name + ".conv2", channels, channels, 3, 1, 1, rng);
  return b;
}

template <typename S>
Var<S> Denoiser<S>::modulate(const Var<S>& h, const Var<S>& film, Index channels) const {
  const Index n = film.dim(0);
  auto f = ad::reshape(film, {n, 2 * channels, 1, 1});
  auto gain = ad::add_scalar(ad::slice(f, 1, 0, channels), S(1));
  auto shift = ad::slice(f, 1, channels, channels);
  return ad::add(ad::mul(h, gain), shift);
}

template <typename S>
Var<S> Denoiser<S>::run_block(const Block& b, const Var<S>& x, const Var<S>& emb) const {
  const Index g = std::min(config_.groups, b.channels);
  auto h = b.conv1(ad::silu(ad::group_norm(x, g)));
  h = modulate(h, b.film(emb), b.channels);
  h = b.conv2(ad::silu(ad::group_norm(h, g)));
  return ad::add(x, h);
}

template <typename S>
Var<S> Denoiser<S>::embed(const std::vector<int>& t, const std::vector<Index>& classes) const {
  auto temb = Var<S>::constant(timestep_features<S>(t, config_.time_dim));
  auto h = time2_(ad::silu(time1_(temb)));
  return ad::silu(ad::add(h, ad::gather_rows(class_table_, classes)));
}

template <typename S>
Var<S> Denoiser<S>::predict(const Var<S>& z, const std::vector<int>& t, const std::vector<Index>& classes) const {
  const auto& s = z.shape();
  if (s.size() != 4 || s[1] != config_.latent_channels || s[2] != config_.latent_size || s[3] != config_.latent_size) {
    throw ShapeError("denoiser input " + shape_string(s) + " does not match latent config [N," +
                     std::to_string(config_.latent_channels) + "," + std::to_string(config_.latent_size) + "," +
                     std::to_string(config_.latent_size) + "]");
  }
  if (static_cast<Index>(t.size()) != s[0] || static_cast<Index>(classes.size()) != s[0]) {
    throw ShapeError("denoiser batch of " + std::to_string(s[0]) + " needs as many timesteps and conditions");
  }
  for (Index c : classes) {
    if (c < 0 || c > config_.null_class()) throw std::out_of_range("unknown class id " + std::to_string(c));
  }
  const Index width = config_.width;
  auto emb = embed(t, classes);
  auto h0 = conv_in_(z);
  auto h1 = run_block(block1_, h0, emb);
  auto h2 = run_block(block2_, down_(h1), emb);
  auto u = up_(ad::concat<S>({ad::upsample_nearest(h2, 2), h1}, 1));
  u = ad::silu(modulate(u, up_film_(emb), width));
  auto h3 = run_block(block3_, u, emb);
  return conv_out_(ad::silu(ad::group_norm(h3, std::min(config_.groups, width))));
}

template <typename S>
Var<S> Denoiser<S>::guided_predict(const Var<S>& z, int t, const std::vector<Index>& classes, double scale) const {
  for (Index c : classes) {
    if (c < 0 || c >= config_.n_classes) throw std::out_of_range("unknown class id " + std::to_string(c));
  }
  const Index n = z.dim(0);
  std::vector<int> ts(static_cast<std::size_t>(n), t);
  if (scale == 1.0) return predict(z, ts, classes);
  std::vector<Index> nulls(static_cast<std::size_t>(n), config_.null_class());
  if (scale == 0.0) return predict(z, ts, nulls);
  std::vector<int> ts2(static_cast<std::size_t>(2 * n), t);
  std::vector<Index> both = classes;
  both.insert(both.end(), nulls.begin(), nulls.end());
  auto eps = predict(ad::concat<S>({z, z}, 0), ts2, both);
  auto cond = ad::slice(eps, 0, 0, n);
  auto uncond = ad::slice(eps, 0, n, n);
  return ad::add(uncond, ad::scale(ad::sub(cond, uncond), static_cast<S>(scale)));
}

template <typename S>
io::Checkpoint Denoiser<S>::to_checkpoint() const {
  io::Checkpoint ckpt;
  ckpt.metadata = training_meta_;
  ckpt.metadata["model"] = "denoiser";
  config_.to_meta(ckpt.metadata);
  ckpt.add_tensors(params_.tensors(), params_.names());
  return ckpt;
}

template <typename S>
Denoiser<S> Denoiser<S>::from_checkpoint(const io::Checkpoint& ckpt) {
  if (ckpt.meta("model") != "denoiser") throw FormatError("checkpoint holds a " + ckpt.meta("model") + ", not a denoiser");
  Denoiser<S> m(DenoiserConfig::from_meta(ckpt.metadata));
  m.params().assign(ckpt.tensors_as<S>());
  m.params().set_trainable(false);
  for (const auto& [k, v] : ckpt.metadata) {
    if (k.rfind("train.", 0) == 0) m.training_metadata()[k] = v;
  }
  return m;
}

template <typename S>
DenoiserTrainLog train_denoiser(Denoiser<S>& model, const Tensor<S>& latents, const std::vector<Index>& labels,
                                const DenoiserTrainConfig& cfg) {
  const Index n = static_cast<Index>(labels.size());
  if (n == 0) throw std::invalid_argument("train_denoiser: empty dataset");
  if (latents.dim(0) != n) throw ShapeError("train_denoiser: latents and labels disagree on dataset size");
  model.params().set_trainable(true);
  Rng rng(cfg.seed);
  ad::Adam<S> opt(model.params().vars(), ad::AdamConfig{cfg.learning_rate});
  const int T = model.schedule().train_steps();
  const Index steps_per_epoch = (n + cfg.batch_size - 1) / cfg.batch_size;
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;
  DenoiserTrainLog log;
  long step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const auto order = nn::shuffled_range(n, rng);
    double total = 0.0;
    Index batches = 0;
    for (Index start = 0; start < n; start += cfg.batch_size) {
      const Index end = std::min(n, start + cfg.batch_size);
      const Index b = end - start;
      std::vector<Index> rows(order.begin() + start, order.begin() + end);
      std::vector<int> ts(static_cast<std::size_t>(b));
      std::vector<Index> cs(static_cast<std::size_t>(b));
      Tensor<S> eps(nn::gather(latents, rows).shape());
      for (Index i = 0; i < b; ++i) {
        ts[static_cast<std::size_t>(i)] = 1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(T)));
        cs[static_cast<std::size_t>(i)] =
            rng.bernoulli(cfg.p_uncond) ? model.config().null_class() : labels[static_cast<std::size_t>(rows[static_cast<std::size_t>(i)])];
      }
      for (Index i = 0; i < eps.size(); ++i) eps[i] = static_cast<S>(rng.normal());
      auto z0 = Var<S>::constant(nn::gather(latents, rows));
      auto noise = Var<S>::constant(eps);
      auto zt = add_noise(z0, ts, noise, model.schedule());
      auto loss = ad::mse(model.predict(zt, ts, cs), noise);
      const double l = static_cast<double>(loss.item());
      if (!std::isfinite(l)) {
        throw NumericError("denoiser loss became non-finite at epoch " + std::to_string(epoch + 1) + ", step " +
                           std::to_string(step));
      }
      const double progress = static_cast<double>(step) / total_steps;
      const double lr = cfg.learning_rate * (0.1 + 0.9 * 0.5 * (1.0 + std::cos(M_PI * progress)));
      opt.step(ad::backward(loss, model.params().vars()), lr);
      total += l;
      ++batches;
      ++step;
    }
    log.epoch_losses.push_back(total / static_cast<double>(batches));
    log::info("denoiser epoch " + std::to_string(epoch + 1) + " loss " + std::to_string(log.epoch_losses.back()));
  }
  model.params().set_trainable(false);
  auto& meta = model.training_metadata();
  io::put_meta(meta, "train.p_uncond", cfg.p_uncond);
  io::put_meta(meta, "train.epochs", cfg.epochs);
  io::put_meta(meta, "train.batch_size", cfg.batch_size);
  io::put_meta(meta, "train.learning_rate", cfg.learning_rate);
  io::put_meta(meta, "train.seed", cfg.seed);
  meta["train.epoch_losses"] = io::join_doubles(log.epoch_losses);
  return log;
}

template class Denoiser<float>;
template class Denoiser<double>;
template Tensor<float> timestep_features(const std::vector<int>&, Index);
template Tensor<double> timestep_features(const std::vector<int>&, Index);
template DenoiserTrainLog train_denoiser(Denoiser<float>&, const Tensor<float>&, const std::vector<Index>&,
                                         const DenoiserTrainConfig&);
template DenoiserTrainLog train_denoiser(Denoiser<double>&, const Tensor<double>&, const std::vector<Index>&,
                                         const DenoiserTrainConfig&);

}  // namespace seedselect::diffusion
