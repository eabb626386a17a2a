#pragma once

#include <vector>

#include "seedselect/autodiff/var.hpp"

// Differentiable primitives. Binary elementwise ops broadcast with the usual
// trailing-axis rule: shapes are right-aligned and an extent of 1 (or a
// missing leading axis) stretches to match the other operand.

namespace seedselect::ad {

Shape broadcast_shape(const Shape& a, const Shape& b);

template <typename S> Var<S> add(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> sub(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> mul(const Var<S>& a, const Var<S>& b);
template <typename S> Var<S> div(const Var<S>& a, const Var<S>& b);

template <typename S> Var<S> add_scalar(const Var<S>& a, S c);
template <typename S> Var<S> scale(const Var<S>& a, S c);
template <typename S> Var<S> neg(const Var<S>& a);

template <typename S> Var<S> exp(const Var<S>& a);
template <typename S> Var<S> log(const Var<S>& a);
/// sqrt with a zero subgradient at 0.
template <typename S> Var<S> sqrt(const Var<S>& a);
template <typename S> Var<S> square(const Var<S>& a);
template <typename S> Var<S> relu(const Var<S>& a);
template <typename S> Var<S> silu(const Var<S>& a);
template <typename S> Var<S> sigmoid(const Var<S>& a);
template <typename S> Var<S> tanh(const Var<S>& a);
template <typename S> Var<S> clamp(const Var<S>& a, S lo, S hi);

template <typename S> Var<S> sum(const Var<S>& a);
template <typename S> Var<S> mean(const Var<S>& a);
template <typename S> Var<S> sum(const Var<S>& a, Index axis, bool keepdim = false);
template <typename S> Var<S> mean(const Var<S>& a, Index axis, bool keepdim = false);

template <typename S> Var<S> reshape(const Var<S>& a, Shape shape);
template <typename S> Var<S> concat(const std::vector<Var<S>>& parts, Index axis);
template <typename S> Var<S> slice(const Var<S>& a, Index axis, Index start, Index length);
template <typename S> Var<S> transpose(const Var<S>& a);
/// Rows of a [R, D] table selected by index; out is [indices.size(), D].
template <typename S> Var<S> gather_rows(const Var<S>& table, const std::vector<Index>& indices);

/// [M, K] x [K, N] -> [M, N].
template <typename S> Var<S> matmul(const Var<S>& a, const Var<S>& b);

struct Conv2dOptions {
  Index stride = 1;
  Index padding = 0;
};

/// x [N, C, H, W], weight [O, C, KH, KW], optional bias [O]; zero padding.
template <typename S> Var<S> conv2d(const Var<S>& x, const Var<S>& weight, Conv2dOptions opt = {});
template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const Var<S>& bias, Conv2dOptions opt = {});

/// Nearest-neighbour upsampling of [N, C, H, W] by an integer factor.
template <typename S> Var<S> upsample_nearest(const Var<S>& x, Index factor);

/// Normalization over channel groups (and all trailing axes) of [N, C, ...];
/// no learned affine, compose with mul/add for that.
template <typename S> Var<S> group_norm(const Var<S>& x, Index groups, S eps = S(1e-5));

template <typename S> Var<S> softmax(const Var<S>& a);
template <typename S> Var<S> log_softmax(const Var<S>& a);

// Convenience compositions.

/// Row-wise L2 normalization of [N, D].
template <typename S> Var<S> l2_normalize_rows(const Var<S>& a, S eps = S(1e-12));
template <typename S> Var<S> mse(const Var<S>& a, const Var<S>& b);
/// Mean cross-entropy of [N, K] logits against integer labels.
template <typename S> Var<S> cross_entropy(const Var<S>& logits, const std::vector<Index>& labels);
/// x [N, in] , weight [in, out], bias [out].
template <typename S> Var<S> linear(const Var<S>& x, const Var<S>& weight, const Var<S>& bias);

template <typename S> Var<S> operator+(const Var<S>& a, const Var<S>& b) { return add(a, b); }
template <typename S> Var<S> operator-(const Var<S>& a, const Var<S>& b) { return sub(a, b); }
template <typename S> Var<S> operator*(const Var<S>& a, const Var<S>& b) { return mul(a, b); }
template <typename S> Var<S> operator/(const Var<S>& a, const Var<S>& b) { return div(a, b); }
template <typename S> Var<S> operator-(const Var<S>& a) { return neg(a); }
template <typename S> Var<S> operator+(const Var<S>& a, S c) { return add_scalar(a, c); }
template <typename S> Var<S> operator-(const Var<S>& a, S c) { return add_scalar(a, -c); }
template <typename S> Var<S> operator*(const Var<S>& a, S c) { return scale(a, c); }
template <typename S> Var<S> operator*(S c, const Var<S>& a) { return scale(a, c); }

}  // namespace seedselect::ad
