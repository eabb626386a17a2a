#pragma once

#include <string>

#include "seedselect/nn/layers.hpp"

namespace seedselect::models {

using ad::Index;
using ad::Tensor;
using ad::Var;

/// Three stride-2 convolutions and a linear head: [N, C, S, S] -> [N, out].
template <typename S>
class ConvEncoder {
 public:
  ConvEncoder() = default;
  ConvEncoder(nn::ParameterSet<S>& params, const std::string& name, Index image_size, Index channels, Index w1,
              Index w2, Index w3, Index out_dim, Rng& rng)
      : image_size_(image_size), channels_(channels), flat_(w3 * (image_size / 8) * (image_size / 8)) {
    if (image_size % 8 != 0) throw std::invalid_argument("encoder image size must be divisible by 8");
    c1_ = nn::Conv2d<S>(params, name + ".conv1", channels, w1, 3, 2, 1, rng);
    c2_ = nn::Conv2d<S>(params, name + ".conv2", w1, w2, 3, 2, 1, rng);
    c3_ = nn::Conv2d<S>(params, name + ".conv3", w2, w3, 3, 2, 1, rng);
    head_ = nn::Linear<S>(params, name + ".head", flat_, out_dim, rng);
  }

  Var<S> operator()(const Var<S>& x) const {
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != channels_ || s[2] != image_size_ || s[3] != image_size_) {
      throw ShapeError("encoder input " + shape_string(s) + " does not match [N," + std::to_string(channels_) + "," +
                       std::to_string(image_size_) + "," + std::to_string(image_size_) + "]");
    }
    auto h = ad::scale(ad::add_scalar(x, S(-0.5)), S(2));
    h = ad::silu(c1_(h));
    h = ad::silu(c2_(h));
    h = ad::silu(c3_(h));
    return head_(ad::reshape(h, {s[0], flat_}));
  }

 private:
  Index image_size_ = 0, channels_ = 0, flat_ = 0;
  nn::Conv2d<S> c1_, c2_, c3_;
  nn::Linear<S> head_;
};

/// Balanced batch of `per_class` rows per class, drawn with replacement.
inline std::vector<Index> balanced_batch(const std::vector<std::vector<Index>>& members, Index per_class, Rng& rng) {
  std::vector<Index> rows;
  for (const auto& m : members) {
    if (m.empty()) continue;
    for (Index i = 0; i < per_class; ++i) rows.push_back(m[rng.below(m.size())]);
  }
  return rows;
}

}  // namespace seedselect::models
