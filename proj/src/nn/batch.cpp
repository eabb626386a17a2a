#include "seedselect/nn/batch.hpp"

namespace seedselect::nn {

ad::Tensor<float> augment_images(const ad::Tensor<float>& batch, ad::Index max_shift, bool flip, Rng& rng) {
  const auto& s = batch.shape();
  const ad::Index N = s[0], C = s[1], H = s[2], W = s[3];
  ad::Tensor<float> out(s);
  for (ad::Index n = 0; n < N; ++n) {
    const auto span = static_cast<std::uint64_t>(2 * max_shift + 1);
    const ad::Index dy = static_cast<ad::Index>(rng.below(span)) - max_shift;
    const ad::Index dx = static_cast<ad::Index>(rng.below(span)) - max_shift;
    const bool mirror = flip && rng.bernoulli(0.5);
    for (ad::Index c = 0; c < C; ++c) {
      const float* src = batch.ptr() + (n * C + c) * H * W;
      float* dst = out.ptr() + (n * C + c) * H * W;
      for (ad::Index y = 0; y < H; ++y) {
        const ad::Index sy = std::clamp<ad::Index>(y - dy, 0, H - 1);
        for (ad::Index x = 0; x < W; ++x) {
          ad::Index sx = std::clamp<ad::Index>(x - dx, 0, W - 1);
          if (mirror) sx = W - 1 - sx;
          dst[y * W + x] = src[sy * W + sx];
        }
      }
    }
  }
  return out;
}

}  // namespace seedselect::nn
