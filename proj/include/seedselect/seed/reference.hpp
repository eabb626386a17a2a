#pragma once

#include <cstdint>
#include <vector>

#include "seedselect/diffusion/autoencoder.hpp"
#include "seedselect/diffusion/denoiser.hpp"
#include "seedselect/models/embedder.hpp"

namespace seedselect::seed {

using ad::Index;
using ad::Tensor;
using ad::Var;

/// The frozen networks the seed objective runs through.
template <typename S>
struct ModelStack {
  const diffusion::Autoencoder<S>* autoencoder = nullptr;
  const diffusion::Denoiser<S>* denoiser = nullptr;
  const models::Embedder<S>* embedder = nullptr;

  /// Combined weight fingerprint of all three networks.
  std::uint64_t weight_hash() const;
};

/// k reference images of one class with their cached latents, embeddings
/// and embedding centroid.
template <typename S>
class ReferenceSet {
 public:
  ReferenceSet(const Tensor<float>& images, Index target_class, const ModelStack<S>& stack);

  /// Replace the images and refresh every cached quantity.
  void set_images(const Tensor<float>& images, const ModelStack<S>& stack);

  /// Bootstrap draw: rows of this set (repeats allowed), reusing caches.
  ReferenceSet subset(const std::vector<Index>& rows) const;

  Index size() const { return images_.dim(0); }
  Index target_class() const { return target_; }
  const Tensor<float>& images() const { return images_; }
  const Tensor<S>& latents() const { return latents_; }        // [k, C, h, w]
  const Tensor<S>& embeddings() const { return embeddings_; }  // [k, D]
  const Tensor<S>& centroid() const { return centroid_; }      // [D]

 private:
  ReferenceSet() = default;
  Tensor<float> images_;
  Index target_ = 0;
  Tensor<S> latents_, embeddings_, centroid_;
};

}  // namespace seedselect::seed
