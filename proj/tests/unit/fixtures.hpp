#pragma once

#include "seedselect/diffusion/autoencoder.hpp"
#include "seedselect/diffusion/denoiser.hpp"
#include "seedselect/models/embedder.hpp"
#include "seedselect/seed/reference.hpp"

namespace fixtures {

using namespace seedselect;

/// Randomly initialized networks small enough for finite differences:
/// 16x16 images, 4x4x4 = 64-element latents, 3 classes.
template <typename S>
struct TinyStack {
  diffusion::Autoencoder<S> ae;
  diffusion::Denoiser<S> dn;
  models::Embedder<S> emb;

  explicit TinyStack(std::uint64_t seed = 1)
      : ae(ae_config(), seed), dn(dn_config(), seed + 1), emb(emb_config(), seed + 2) {
    ae.params().set_trainable(false);
    dn.params().set_trainable(false);
    emb.params().set_trainable(false);
    emb.mark_ready();
  }

  seed::ModelStack<S> stack() const { return {&ae, &dn, &emb}; }

  static diffusion::AutoencoderConfig ae_config() {
    diffusion::AutoencoderConfig c;
    c.image_size = 16;
    c.width = 6;
    c.wide_width = 8;
    return c;
  }
  static diffusion::DenoiserConfig dn_config() {
    diffusion::DenoiserConfig c;
    c.latent_size = 4;
    c.width = 8;
    c.time_dim = 8;
    c.embed_dim = 16;
    c.groups = 4;
    c.n_classes = 3;
    return c;
  }
  static models::EmbedderConfig emb_config() {
    models::EmbedderConfig c;
    c.image_size = 16;
    c.width = 4;
    c.embed_dim = 8;
    return c;
  }
};

/// Random images [n, 3, s, s] in [0, 1].
inline ad::Tensor<float> random_images(ad::Index n, ad::Index s, std::uint64_t seed) {
  Rng rng(seed);
  ad::Tensor<float> t({n, 3, s, s});
  for (ad::Index i = 0; i < t.size(); ++i) t[i] = static_cast<float>(rng.uniform());
  return t;
}

}  // namespace fixtures
