#pragma once

#include <algorithm>
#include <numeric>
#include <vector>

#include "seedselect/autodiff/tensor.hpp"
#include "seedselect/core/rng.hpp"

namespace seedselect::nn {

using Shape = ad::Shape;

/// Images [N, C, H, W] in [0, 1] with integer class labels.
struct LabeledImages {
  ad::Tensor<float> images;
  std::vector<ad::Index> labels;
  ad::Index n_classes = 0;

  ad::Index size() const { return static_cast<ad::Index>(labels.size()); }
  Shape image_shape() const {
    Shape s = images.shape();
    s.front() = 1;
    return s;
  }
  std::vector<ad::Index> indices_of(ad::Index label) const {
    std::vector<ad::Index> out;
    for (ad::Index i = 0; i < size(); ++i)
      if (labels[static_cast<std::size_t>(i)] == label) out.push_back(i);
    return out;
  }
};

/// Copy the selected rows of a batch tensor.
template <typename S>
ad::Tensor<S> gather(const ad::Tensor<S>& all, const std::vector<ad::Index>& rows) {
  Shape shape = all.shape();
  const ad::Index per = all.size() / shape.front();
  shape.front() = static_cast<ad::Index>(rows.size());
  ad::Tensor<S> out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(all.ptr() + rows[i] * per, per, out.ptr() + static_cast<ad::Index>(i) * per);
  }
  return out;
}

inline std::vector<ad::Index> shuffled_range(ad::Index n, Rng& rng) {
  std::vector<ad::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  for (ad::Index i = n - 1; i > 0; --i) {
    std::swap(idx[static_cast<std::size_t>(i)], idx[rng.below(static_cast<std::uint64_t>(i + 1))]);
  }
  return idx;
}

/// Class-balanced sample: every class contributes equally, with replacement.
inline std::vector<ad::Index> balanced_sample(const LabeledImages& data, ad::Index per_class, Rng& rng) {
  std::vector<ad::Index> out;
  for (ad::Index c = 0; c < data.n_classes; ++c) {
    const auto members = data.indices_of(c);
    if (members.empty()) continue;
    for (ad::Index k = 0; k < per_class; ++k) out.push_back(members[rng.below(members.size())]);
  }
  return out;
}

/// Random translation by up to `max_shift` pixels (edge replicate) and
/// optional horizontal flip, per image.
ad::Tensor<float> augment_images(const ad::Tensor<float>& batch, ad::Index max_shift, bool flip, Rng& rng);

}  // namespace seedselect::nn
