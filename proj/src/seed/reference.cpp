#include "seedselect/seed/reference.hpp"

#include "seedselect/core/hash.hpp"

namespace seedselect::seed {

template <typename S>
std::uint64_t ModelStack<S>::weight_hash() const {
  if (!autoencoder || !denoiser || !embedder) throw std::logic_error("model stack is incomplete");
  Fnv1a h;
  h.update_value(autoencoder->params().hash());
  h.update_value(denoiser->params().hash());
  h.update_value(embedder->params().hash());
  return h.digest();
}

template <typename S>
ReferenceSet<S>::ReferenceSet(const Tensor<float>& images, Index target_class, const ModelStack<S>& stack)
    : target_(target_class) {
  set_images(images, stack);
}

template <typename S>
void ReferenceSet<S>::set_images(const Tensor<float>& images, const ModelStack<S>& stack) {
  if (images.rank() != 4 || images.dim(0) < 1) {
    throw std::invalid_argument("reference set needs at least one [C, H, W] image");
  }
  if (target_ < 0 || target_ >= stack.denoiser->config().n_classes) {
    throw std::out_of_range("reference class " + std::to_string(target_) + " is not a known class");
  }
  images_ = images;
  latents_ = diffusion::encode_all(*stack.autoencoder, images);
  embeddings_ = models::embed_all(*stack.embedder, images);
  centroid_ = models::centroid_of_rows(embeddings_);
}

template <typename S>
ReferenceSet<S> ReferenceSet<S>::subset(const std::vector<Index>& rows) const {
  if (rows.empty()) throw std::invalid_argument("reference subset needs at least one row");
  for (Index r : rows) {
    if (r < 0 || r >= size()) throw std::out_of_range("reference row " + std::to_string(r) + " out of range");
  }
  ReferenceSet out;
  out.target_ = target_;
  out.images_ = nn::gather(images_, rows);
  out.latents_ = nn::gather(latents_, rows);
  out.embeddings_ = nn::gather(embeddings_, rows);
  out.centroid_ = models::centroid_of_rows(out.embeddings_);
  return out;
}

template struct ModelStack<float>;
template struct ModelStack<double>;
template class ReferenceSet<float>;
template class ReferenceSet<double>;

}  // namespace seedselect::seed
