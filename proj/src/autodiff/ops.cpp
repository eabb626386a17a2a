#include "seedselect/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>

namespace seedselect::ad {

namespace {

template <typename S>
using Sinks = std::span<Tensor<S>*>;

Index normalize_axis(Index axis, Index rank) {
  const Index a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for rank " + std::to_string(rank));
  }
  return a;
}

/// Offsets into an operand for every element of the broadcast output.
std::vector<Index> broadcast_offsets(const Shape& out, const Shape& in) {
  const Index rank = static_cast<Index>(out.size());
  const Index shift = rank - static_cast<Index>(in.size());
  std::vector<Index> stride(static_cast<std::size_t>(rank), 0);
  Index s = 1;
  for (Index k = static_cast<Index>(in.size()) - 1; k >= 0; --k) {
    if (in[static_cast<std::size_t>(k)] != 1) stride[static_cast<std::size_t>(k + shift)] = s;
    s *= in[static_cast<std::size_t>(k)];
  }
  const Index total = numel(out);
  std::vector<Index> offsets(static_cast<std::size_t>(total));
  std::vector<Index> idx(static_cast<std::size_t>(rank), 0);
  Index off = 0;
  for (Index i = 0; i < total; ++i) {
    offsets[static_cast<std::size_t>(i)] = off;
    for (Index k = rank - 1; k >= 0; --k) {
      auto uk = static_cast<std::size_t>(k);
      ++idx[uk];
      off += stride[uk];
      if (idx[uk] < out[uk]) break;
      off -= stride[uk] * out[uk];
      idx[uk] = 0;
    }
  }
  return offsets;
}

enum class BinOp { Add, Sub, Mul, Div };

template <typename S>
S apply(BinOp op, S a, S b) {
  switch (op) {
    case BinOp::Add: return a + b;
    case BinOp::Sub: return a - b;
    case BinOp::Mul: return a * b;
    case BinOp::Div: return a / b;
  }
  return S(0);
}

constexpr const char* bin_name(BinOp op) {
  switch (op) {
    case BinOp::Add: return "add";
    case BinOp::Sub: return "sub";
    case BinOp::Mul: return "mul";
    case BinOp::Div: return "div";
  }
  return "?";
}

template <typename S>
Var<S> binary(BinOp op, const Var<S>& a, const Var<S>& b) {
  const auto& av = a.value();
  const auto& bv = b.value();
  if (av.shape() == bv.shape()) {
    Tensor<S> out(av.shape());
    switch (op) {
      case BinOp::Add: out.data() = av.data() + bv.data(); break;
      case BinOp::Sub: out.data() = av.data() - bv.data(); break;
      case BinOp::Mul: out.data() = av.data() * bv.data(); break;
      case BinOp::Div: out.data() = av.data() / bv.data(); break;
    }
    return record<S>(bin_name(op), std::move(out), {a, b},
                     [op](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
                       const auto& x = self.parents[0]->value.data();
                       const auto& y = self.parents[1]->value.data();
                       switch (op) {
                         case BinOp::Add:
                           if (pg[0]) pg[0]->data() += g.data();
                           if (pg[1]) pg[1]->data() += g.data();
                           break;
                         case BinOp::Sub:
                           if (pg[0]) pg[0]->data() += g.data();
                           if (pg[1]) pg[1]->data() -= g.data();
                           break;
                         case BinOp::Mul:
                           if (pg[0]) pg[0]->data() += g.data() * y;
                           if (pg[1]) pg[1]->data() += g.data() * x;
                           break;
                         case BinOp::Div:
                           if (pg[0]) pg[0]->data() += g.data() / y;
                           if (pg[1]) pg[1]->data() -= g.data() * x / (y * y);
                           break;
                       }
                     });
  }

  Shape out_shape = broadcast_shape(av.shape(), bv.shape());
  auto ao = std::make_shared<const std::vector<Index>>(broadcast_offsets(out_shape, av.shape()));
  auto bo = std::make_shared<const std::vector<Index>>(broadcast_offsets(out_shape, bv.shape()));
  Tensor<S> out(out_shape);
  const Index n = out.size();
  for (Index i = 0; i < n; ++i) {
    out[i] = apply(op, av[(*ao)[static_cast<std::size_t>(i)]], bv[(*bo)[static_cast<std::size_t>(i)]]);
  }
  return record<S>(bin_name(op), std::move(out), {a, b},
                   [op, ao, bo](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
                     const auto& x = self.parents[0]->value;
                     const auto& y = self.parents[1]->value;
                     const Index n = g.size();
                     for (Index i = 0; i < n; ++i) {
                       const Index ia = (*ao)[static_cast<std::size_t>(i)];
                       const Index ib = (*bo)[static_cast<std::size_t>(i)];
                       const S gi = g[i];
                       switch (op) {
                         case BinOp::Add:
                           if (pg[0]) (*pg[0])[ia] += gi;
                           if (pg[1]) (*pg[1])[ib] += gi;
                           break;
                         case BinOp::Sub:
                           if (pg[0]) (*pg[0])[ia] += gi;
                           if (pg[1]) (*pg[1])[ib] -= gi;
                           break;
                         case BinOp::Mul:
                           if (pg[0]) (*pg[0])[ia] += gi * y[ib];
                           if (pg[1]) (*pg[1])[ib] += gi * x[ia];
                           break;
                         case BinOp::Div:
                           if (pg[0]) (*pg[0])[ia] += gi / y[ib];
                           if (pg[1]) (*pg[1])[ib] -= gi * x[ia] / (y[ib] * y[ib]);
                           break;
                       }
                     }
                   });
}

/// Elementwise unary op; `deriv(x, y)` returns dy/dx.
template <typename S, typename Fwd, typename Deriv>
Var<S> unary(const char* name, const Var<S>& a, Fwd fwd, Deriv deriv) {
  Tensor<S> out(a.shape());
  const auto& x = a.value().data();
  auto& y = out.data();
  for (Index i = 0; i < x.size(); ++i) y[i] = fwd(x[i]);
  return record<S>(name, std::move(out), {a}, [deriv](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
    if (!pg[0]) return;
    const auto& xv = self.parents[0]->value.data();
    const auto& yv = self.value.data();
    auto& gx = pg[0]->data();
    for (Index i = 0; i < xv.size(); ++i) gx[i] += g[i] * deriv(xv[i], yv[i]);
  });
}

template <typename S>
void im2col(const S* x, Index C, Index H, Index W, Index KH, Index KW, Index stride, Index pad,
            Index OH, Index OW, S* col) {
  const Index ohw = OH * OW;
  for (Index c = 0; c < C; ++c) {
    for (Index kh = 0; kh < KH; ++kh) {
      for (Index kw = 0; kw < KW; ++kw) {
        S* row = col + ((c * KH + kh) * KW + kw) * ohw;
        for (Index oh = 0; oh < OH; ++oh) {
          const Index ih = oh * stride - pad + kh;
          S* dst = row + oh * OW;
          if (ih < 0 || ih >= H) {
            std::fill(dst, dst + OW, S(0));
            continue;
          }
          const S* src = x + (c * H + ih) * W;
          for (Index ow = 0; ow < OW; ++ow) {
            const Index iw = ow * stride - pad + kw;
            dst[ow] = (iw >= 0 && iw < W) ? src[iw] : S(0);
          }
        }
      }
    }
  }
}

template <typename S>
void col2im(const S* col, Index C, Index H, Index W, Index KH, Index KW, Index stride, Index pad,
            Index OH, Index OW, S* x) {
  const Index ohw = OH * OW;
  for (Index c = 0; c < C; ++c) {
    for (Index kh = 0; kh < KH; ++kh) {
      for (Index kw = 0; kw < KW; ++kw) {
        const S* row = col + ((c * KH + kh) * KW + kw) * ohw;
        for (Index oh = 0; oh < OH; ++oh) {
          const Index ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= H) continue;
          S* dst = x + (c * H + ih) * W;
          const S* src = row + oh * OW;
          for (Index ow = 0; ow < OW; ++ow) {
            const Index iw = ow * stride - pad + kw;
            if (iw >= 0 && iw < W) dst[iw] += src[ow];
          }
        }
      }
    }
  }
}

template <typename S>
Var<S> conv2d_impl(const Var<S>& x, const Var<S>& weight, const Var<S>* bias, Conv2dOptions opt) {
  const auto& xs = x.shape();
  const auto& ws = weight.shape();
  if (xs.size() != 4 || ws.size() != 4 || xs[1] != ws[1]) {
    throw ShapeError("conv2d: input " + shape_string(xs) + " incompatible with weight " + shape_string(ws));
  }
  if (bias && (bias->shape().size() != 1 || bias->shape()[0] != ws[0])) {
    throw ShapeError("conv2d: bias " + shape_string(bias->shape()) + " does not match weight " +
                     shape_string(ws));
  }
  if (opt.stride < 1 || opt.padding < 0) throw ShapeError("conv2d: invalid stride/padding");
  const Index N = xs[0], C = xs[1], H = xs[2], W = xs[3];
  const Index O = ws[0], KH = ws[2], KW = ws[3];
  const Index OH = (H + 2 * opt.padding - KH) / opt.stride + 1;
  const Index OW = (W + 2 * opt.padding - KW) / opt.stride + 1;
  if (H + 2 * opt.padding < KH || W + 2 * opt.padding < KW || OH < 1 || OW < 1) {
    throw ShapeError("conv2d: kernel " + shape_string(ws) + " larger than padded input " + shape_string(xs));
  }
  const Index ckk = C * KH * KW;
  const Index ohw = OH * OW;
  const bool pointwise = KH == 1 && KW == 1 && opt.stride == 1 && opt.padding == 0;

  using Mat = typename Tensor<S>::RowMatrix;
  using CMap = Eigen::Map<const Mat>;
  using MMap = Eigen::Map<Mat>;

  Tensor<S> out(Shape{N, O, OH, OW});
  CMap wm(weight.value().ptr(), O, ckk);
  Mat col(pointwise ? 0 : ckk, pointwise ? 0 : ohw);
  for (Index n = 0; n < N; ++n) {
    const S* xn = x.value().ptr() + n * C * H * W;
    MMap on(out.ptr() + n * O * ohw, O, ohw);
    if (pointwise) {
      on.noalias() = wm * CMap(xn, C, ohw);
    } else {
      im2col(xn, C, H, W, KH, KW, opt.stride, opt.padding, OH, OW, col.data());
      on.noalias() = wm * col;
    }
    if (bias) on.colwise() += Eigen::Map<const Eigen::Matrix<S, Eigen::Dynamic, 1>>(bias->value().ptr(), O);
  }

  auto rule = [=](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
    const Tensor<S>& xv = self.parents[0]->value;
    const Tensor<S>& wv = self.parents[1]->value;
    CMap w(wv.ptr(), O, ckk);
    Mat colb(pointwise ? 0 : ckk, pointwise ? 0 : ohw);
    Mat gcol;
    for (Index n = 0; n < N; ++n) {
      CMap gn(g.ptr() + n * O * ohw, O, ohw);
      const S* xn = xv.ptr() + n * C * H * W;
      if (pg[1]) {
        MMap gw(pg[1]->ptr(), O, ckk);
        if (pointwise) {
          gw.noalias() += gn * CMap(xn, C, ohw).transpose();
        } else {
          im2col(xn, C, H, W, KH, KW, opt.stride, opt.padding, OH, OW, colb.data());
          gw.noalias() += gn * colb.transpose();
        }
      }
      if (pg[0]) {
        S* gx = pg[0]->ptr() + n * C * H * W;
        if (pointwise) {
          MMap(gx, C, ohw).noalias() += w.transpose() * gn;
        } else {
          gcol.noalias() = w.transpose() * gn;
          col2im(gcol.data(), C, H, W, KH, KW, opt.stride, opt.padding, OH, OW, gx);
        }
      }
      if (pg.size() > 2 && pg[2]) {
        Eigen::Map<Eigen::Matrix<S, Eigen::Dynamic, 1>>(pg[2]->ptr(), O) += gn.rowwise().sum();
      }
    }
  };
  if (bias) return record<S>("conv2d", std::move(out), {x, weight, *bias}, rule);
  return record<S>("conv2d", std::move(out), {x, weight}, rule);
}

}  // namespace

Shape broadcast_shape(const Shape& a, const Shape& b) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank);
  for (std::size_t k = 0; k < rank; ++k) {
    const Index da = k < rank - a.size() ? 1 : a[k - (rank - a.size())];
    const Index db = k < rank - b.size() ? 1 : b[k - (rank - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError("cannot broadcast shapes " + shape_string(a) + " and " + shape_string(b));
    }
    out[k] = std::max(da, db);
  }
  return out;
}

template <typename S> Var<S> add(const Var<S>& a, const Var<S>& b) { return binary(BinOp::Add, a, b); }
template <typename S> Var<S> sub(const Var<S>& a, const Var<S>& b) { return binary(BinOp::Sub, a, b); }
template <typename S> Var<S> mul(const Var<S>& a, const Var<S>& b) { return binary(BinOp::Mul, a, b); }
template <typename S> Var<S> div(const Var<S>& a, const Var<S>& b) { return binary(BinOp::Div, a, b); }

template <typename S>
Var<S> add_scalar(const Var<S>& a, S c) {
  Tensor<S> out(a.shape(), a.value().data() + c);
  return record<S>("add_scalar", std::move(out), {a}, [](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
    if (pg[0]) pg[0]->data() += g.data();
  });
}

template <typename S>
Var<S> scale(const Var<S>& a, S c) {
  Tensor<S> out(a.shape(), a.value().data() * c);
  return record<S>("scale", std::move(out), {a}, [c](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
    if (pg[0]) pg[0]->data() += g.data() * c;
  });
}

template <typename S> Var<S> neg(const Var<S>& a) { return scale(a, S(-1)); }

template <typename S>
Var<S> exp(const Var<S>& a) {
  return unary<S>("exp", a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> log(const Var<S>& a) {
  return unary<S>("log", a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

template <typename S>
Var<S> sqrt(const Var<S>& a) {
  return unary<S>("sqrt", a, [](S x) { return std::sqrt(x); },
                  [](S, S y) { return y > S(0) ? S(0.5) / y : S(0); });
}

template <typename S>
Var<S> square(const Var<S>& a) {
  return unary<S>("square", a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
}

template <typename S>
Var<S> relu(const Var<S>& a) {
  return unary<S>("relu", a, [](S x) { return x > S(0) ? x : S(0); },
                  [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> sigmoid(const Var<S>& a) {
  return unary<S>("sigmoid", a, [](S x) { return S(1) / (S(1) + std::exp(-x)); },
                  [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> silu(const Var<S>& a) {
  return unary<S>("silu", a, [](S x) { return x / (S(1) + std::exp(-x)); },
                  [](S x, S) {
                    const S s = S(1) / (S(1) + std::exp(-x));
                    return s * (S(1) + x * (S(1) - s));
                  });
}

template <typename S>
Var<S> tanh(const Var<S>& a) {
  return unary<S>("tanh", a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> clamp(const Var<S>& a, S lo, S hi) {
  return unary<S>("clamp", a, [lo, hi](S x) { return std::clamp(x, lo, hi); },
                  [lo, hi](S x, S) { return (x >= lo && x <= hi) ? S(1) : S(0); });
}

template <typename S>
Var<S> sum(const Var<S>& a) {
  Tensor<S> out = Tensor<S>::scalar(a.value().data().sum());
  return record<S>("sum", std::move(out), {a}, [](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
    if (pg[0]) pg[0]->data() += g[0];
  });
}

template <typename S>
Var<S> mean(const Var<S>& a) {
  return scale(sum(a), S(1) / static_cast<S>(a.size()));
}

template <typename S>
Var<S> sum(const Var<S>& a, Index axis, bool keepdim) {
  const Shape& s = a.shape();
  const Index ax = normalize_axis(axis, static_cast<Index>(s.size()));
  Index outer = 1, inner = 1;
  for (Index k = 0; k < ax; ++k) outer *= s[static_cast<std::size_t>(k)];
  for (Index k = ax + 1; k < static_cast<Index>(s.size()); ++k) inner *= s[static_cast<std::size_t>(k)];
  const Index n = s[static_cast<std::size_t>(ax)];
  Shape os = s;
  if (keepdim || s.size() == 1) {
    os[static_cast<std::size_t>(ax)] = 1;
  } else {
    os.erase(os.begin() + ax);
  }
  Tensor<S> out(os);
  const S* x = a.value().ptr();
  for (Index o = 0; o < outer; ++o)
    for (Index k = 0; k < n; ++k)
      for (Index i = 0; i < inner; ++i) out[o * inner + i] += x[(o * n + k) * inner + i];
  return record<S>("sum_axis", std::move(out), {a},
                   [outer, inner, n](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
                     if (!pg[0]) return;
                     S* gx = pg[0]->ptr();
                     for (Index o = 0; o < outer; ++o)
                       for (Index k = 0; k < n; ++k)
                         for (Index i = 0; i < inner; ++i) gx[(o * n + k) * inner + i] += g[o * inner + i];
                   });
}

template <typename S>
Var<S> mean(const Var<S>& a, Index axis, bool keepdim) {
  const Index n = a.value().dim(axis);
  return scale(sum(a, axis, keepdim), S(1) / static_cast<S>(n));
}

template <typename S>
Var<S> reshape(const Var<S>& a, Shape shape) {
  Tensor<S> out = a.value().reshaped(std::move(shape));
  return record<S>("reshape", std::move(out), {a}, [](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
    if (pg[0]) pg[0]->data() += g.data();
  });
}

template <typename S>
Var<S> concat(const std::vector<Var<S>>& parts, Index axis) {
  if (parts.empty()) throw ShapeError("concat of zero tensors");
  const Shape& s0 = parts.front().shape();
  const Index ax = normalize_axis(axis, static_cast<Index>(s0.size()));
  Index outer = 1, inner = 1;
  for (Index k = 0; k < ax; ++k) outer *= s0[static_cast<std::size_t>(k)];
  for (Index k = ax + 1; k < static_cast<Index>(s0.size()); ++k) inner *= s0[static_cast<std::size_t>(k)];
  std::vector<Index> widths;
  Index total = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    bool ok = s.size() == s0.size();
    for (std::size_t k = 0; ok && k < s.size(); ++k) ok = (static_cast<Index>(k) == ax) || s[k] == s0[k];
    if (!ok) throw ShapeError("concat: shape " + shape_string(s) + " incompatible with " + shape_string(s0));
    widths.push_back(s[static_cast<std::size_t>(ax)] * inner);
    total += s[static_cast<std::size_t>(ax)];
  }
  Shape os = s0;
  os[static_cast<std::size_t>(ax)] = total;
  Tensor<S> out(os);
  const Index row = total * inner;
  Index start = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const S* src = parts[p].value().ptr();
    for (Index o = 0; o < outer; ++o) std::copy_n(src + o * widths[p], widths[p], out.ptr() + o * row + start);
    start += widths[p];
  }
  return record<S>("concat", std::move(out), parts,
                   [widths, outer, row](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
                     Index start = 0;
                     for (std::size_t p = 0; p < widths.size(); ++p) {
                       if (pg[p]) {
                         S* dst = pg[p]->ptr();
                         for (Index o = 0; o < outer; ++o) {
                           const S* src = g.ptr() + o * row + start;
                           for (Index i = 0; i < widths[p]; ++i) dst[o * widths[p] + i] += src[i];
                         }
                       }
                       start += widths[p];
                     }
                   });
}

template <typename S>
Var<S> slice(const Var<S>& a, Index axis, Index start, Index length) {
  const Shape& s = a.shape();
  const Index ax = normalize_axis(axis, static_cast<Index>(s.size()));
  const Index n = s[static_cast<std::size_t>(ax)];
  if (start < 0 || length < 1 || start + length > n) {
    throw ShapeError("slice [" + std::to_string(start) + ", " + std::to_string(start + length) +
                     ") out of range for axis of extent " + std::to_string(n) + " in " + shape_string(s));
  }
  Index outer = 1, inner = 1;
  for (Index k = 0; k < ax; ++k) outer *= s[static_cast<std::size_t>(k)];
  for (Index k = ax + 1; k < static_cast<Index>(s.size()); ++k) inner *= s[static_cast<std::size_t>(k)];
  Shape os = s;
  os[static_cast<std::size_t>(ax)] = length;
  Tensor<S> out(os);
  const Index w = length * inner;
  for (Index o = 0; o < outer; ++o)
    std::copy_n(a.value().ptr() + (o * n + start) * inner, w, out.ptr() + o * w);
  return record<S>("slice", std::move(out), {a},
                   [outer, inner, n, start, w](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
                     if (!pg[0]) return;
                     for (Index o = 0; o < outer; ++o) {
                       S* dst = pg[0]->ptr() + (o * n + start) * inner;
                       const S* src = g.ptr() + o * w;
                       for (Index i = 0; i < w; ++i) dst[i] += src[i];
                     }
                   });
}

template <typename S>
Var<S> transpose(const Var<S>& a) {
  if (a.shape().size() != 2) throw ShapeError("transpose expects a matrix, got " + shape_string(a.shape()));
  const Index r = a.dim(0), c = a.dim(1);
  Tensor<S> out(Shape{c, r});
  out.matrix(c, r) = a.value().matrix(r, c).transpose();
  return record<S>("transpose", std::move(out), {a}, [r, c](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
    if (pg[0]) pg[0]->matrix(r, c) += g.matrix(c, r).transpose();
  });
}

template <typename S>
Var<S> gather_rows(const Var<S>& table, const std::vector<Index>& indices) {
  if (table.shape().size() != 2) throw ShapeError("gather_rows expects a [R, D] table, got " + shape_string(table.shape()));
  const Index R = table.dim(0), D = table.dim(1);
  const Index L = static_cast<Index>(indices.size());
  if (L == 0) throw ShapeError("gather_rows with no indices");
  Tensor<S> out(Shape{L, D});
  for (Index i = 0; i < L; ++i) {
    const Index r = indices[static_cast<std::size_t>(i)];
    if (r < 0 || r >= R) throw ShapeError("gather_rows index " + std::to_string(r) + " out of range for " + shape_string(table.shape()));
    std::copy_n(table.value().ptr() + r * D, D, out.ptr() + i * D);
  }
  return record<S>("gather_rows", std::move(out), {table},
                   [indices, D](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
                     if (!pg[0]) return;
                     for (std::size_t i = 0; i < indices.size(); ++i) {
                       S* dst = pg[0]->ptr() + indices[i] * D;
                       const S* src = g.ptr() + static_cast<Index>(i) * D;
                       for (Index d = 0; d < D; ++d) dst[d] += src[d];
                     }
                   });
}

template <typename S>
Var<S> matmul(const Var<S>& a, const Var<S>& b) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (as.size() != 2 || bs.size() != 2 || as[1] != bs[0]) {
    throw ShapeError("matmul: shapes " + shape_string(as) + " and " + shape_string(bs) + " are not aligned");
  }
  const Index M = as[0], K = as[1], N = bs[1];
  Tensor<S> out(Shape{M, N});
  out.matrix(M, N).noalias() = a.value().matrix(M, K) * b.value().matrix(K, N);
  return record<S>("matmul", std::move(out), {a, b}, [M, K, N](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
    const auto gm = g.matrix(M, N);
    if (pg[0]) pg[0]->matrix(M, K).noalias() += gm * self.parents[1]->value.matrix(K, N).transpose();
    if (pg[1]) pg[1]->matrix(K, N).noalias() += self.parents[0]->value.matrix(M, K).transpose() * gm;
  });
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, Conv2dOptions opt) {
  return conv2d_impl<S>(x, weight, nullptr, opt);
}

template <typename S>
Var<S> conv2d(const Var<S>& x, const Var<S>& weight, const Var<S>& bias, Conv2dOptions opt) {
  return conv2d_impl<S>(x, weight, &bias, opt);
}

template <typename S>
Var<S> upsample_nearest(const Var<S>& x, Index f) {
  const Shape& s = x.shape();
  if (s.size() != 4 || f < 1) throw ShapeError("upsample_nearest expects [N,C,H,W], got " + shape_string(s));
  const Index planes = s[0] * s[1], H = s[2], W = s[3];
  const Index OH = H * f, OW = W * f;
  Tensor<S> out(Shape{s[0], s[1], OH, OW});
  for (Index p = 0; p < planes; ++p) {
    const S* src = x.value().ptr() + p * H * W;
    S* dst = out.ptr() + p * OH * OW;
    for (Index i = 0; i < OH; ++i)
      for (Index j = 0; j < OW; ++j) dst[i * OW + j] = src[(i / f) * W + j / f];
  }
  return record<S>("upsample_nearest", std::move(out), {x},
                   [planes, H, W, f, OH, OW](const Node<S>&, const Tensor<S>& g, Sinks<S> pg) {
                     if (!pg[0]) return;
                     for (Index p = 0; p < planes; ++p) {
                       const S* src = g.ptr() + p * OH * OW;
                       S* dst = pg[0]->ptr() + p * H * W;
                       for (Index i = 0; i < OH; ++i)
                         for (Index j = 0; j < OW; ++j) dst[(i / f) * W + j / f] += src[i * OW + j];
                     }
                   });
}

template <typename S>
Var<S> group_norm(const Var<S>& x, Index groups, S eps) {
  const Shape& s = x.shape();
  if (s.size() < 2 || groups < 1 || s[1] % groups != 0) {
    throw ShapeError("group_norm: " + std::to_string(groups) + " groups do not divide channels of " + shape_string(s));
  }
  const Index blocks = s[0] * groups;
  const Index len = x.size() / blocks;
  Tensor<S> out(s);
  auto inv = std::make_shared<std::vector<S>>(static_cast<std::size_t>(blocks));
  for (Index b = 0; b < blocks; ++b) {
    Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> xb(x.value().ptr() + b * len, len);
    const S m = xb.mean();
    const S var = (xb - m).square().mean();
    const S is = S(1) / std::sqrt(var + eps);
    (*inv)[static_cast<std::size_t>(b)] = is;
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(out.ptr() + b * len, len) = (xb - m) * is;
  }
  return record<S>("group_norm", std::move(out), {x}, [blocks, len, inv](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
    if (!pg[0]) return;
    for (Index b = 0; b < blocks; ++b) {
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> y(self.value.ptr() + b * len, len);
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> gb(g.ptr() + b * len, len);
      const S gm = gb.mean();
      const S gym = (gb * y).mean();
      Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(pg[0]->ptr() + b * len, len) +=
          (gb - gm - y * gym) * (*inv)[static_cast<std::size_t>(b)];
    }
  });
}

template <typename S>
Var<S> softmax(const Var<S>& a) {
  const Index cols = a.shape().back();
  const Index rows = a.size() / cols;
  Tensor<S> out(a.shape());
  for (Index r = 0; r < rows; ++r) {
    Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> x(a.value().ptr() + r * cols, cols);
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>> y(out.ptr() + r * cols, cols);
    y = (x - x.maxCoeff()).exp();
    y /= y.sum();
  }
  return record<S>("softmax", std::move(out), {a}, [rows, cols](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
    if (!pg[0]) return;
    for (Index r = 0; r < rows; ++r) {
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> y(self.value.ptr() + r * cols, cols);
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> gr(g.ptr() + r * cols, cols);
      Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(pg[0]->ptr() + r * cols, cols) += y * (gr - (gr * y).sum());
    }
  });
}

template <typename S>
Var<S> log_softmax(const Var<S>& a) {
  const Index cols = a.shape().back();
  const Index rows = a.size() / cols;
  Tensor<S> out(a.shape());
  for (Index r = 0; r < rows; ++r) {
    Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> x(a.value().ptr() + r * cols, cols);
    const S m = x.maxCoeff();
    const S lse = m + std::log((x - m).exp().sum());
    Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(out.ptr() + r * cols, cols) = x - lse;
  }
  return record<S>("log_softmax", std::move(out), {a}, [rows, cols](const Node<S>& self, const Tensor<S>& g, Sinks<S> pg) {
    if (!pg[0]) return;
    for (Index r = 0; r < rows; ++r) {
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> y(self.value.ptr() + r * cols, cols);
      Eigen::Map<const Eigen::Array<S, Eigen::Dynamic, 1>> gr(g.ptr() + r * cols, cols);
      Eigen::Map<Eigen::Array<S, Eigen::Dynamic, 1>>(pg[0]->ptr() + r * cols, cols) += gr - y.exp() * gr.sum();
    }
  });
}

template <typename S>
Var<S> l2_normalize_rows(const Var<S>& a, S eps) {
  if (a.shape().size() != 2) throw ShapeError("l2_normalize_rows expects [N, D], got " + shape_string(a.shape()));
  return div(a, sqrt(add_scalar(sum(square(a), 1, true), eps)));
}

template <typename S>
Var<S> mse(const Var<S>& a, const Var<S>& b) {
  if (a.shape() != b.shape()) throw ShapeError("mse: shapes " + shape_string(a.shape()) + " and " + shape_string(b.shape()) + " differ");
  return mean(square(sub(a, b)));
}

template <typename S>
Var<S> cross_entropy(const Var<S>& logits, const std::vector<Index>& labels) {
  const Shape& s = logits.shape();
  if (s.size() != 2 || s[0] != static_cast<Index>(labels.size())) {
    throw ShapeError("cross_entropy: logits " + shape_string(s) + " vs " + std::to_string(labels.size()) + " labels");
  }
  Tensor<S> onehot(s);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= s[1]) throw ShapeError("cross_entropy: label out of range");
    onehot[static_cast<Index>(i) * s[1] + labels[i]] = S(-1) / static_cast<S>(labels.size());
  }
  return sum(mul(log_softmax(logits), Var<S>::constant(std::move(onehot))));
}

template <typename S>
Var<S> linear(const Var<S>& x, const Var<S>& weight, const Var<S>& bias) {
  return add(matmul(x, weight), bias);
}

#define SEEDSELECT_INSTANTIATE_OPS(S)                                                     \
  template Var<S> add(const Var<S>&, const Var<S>&);                                      \
  template Var<S> sub(const Var<S>&, const Var<S>&);                                      \
  template Var<S> mul(const Var<S>&, const Var<S>&);                                      \
  template Var<S> div(const Var<S>&, const Var<S>&);                                      \
  template Var<S> add_scalar(const Var<S>&, S);                                           \
  template Var<S> scale(const Var<S>&, S);                                                \
  template Var<S> neg(const Var<S>&);                                                     \
  template Var<S> exp(const Var<S>&);                                                     \
  template Var<S> log(const Var<S>&);                                                     \
  template Var<S> sqrt(const Var<S>&);                                                    \
  template Var<S> square(const Var<S>&);                                                  \
  template Var<S> relu(const Var<S>&);                                                    \
  template Var<S> silu(const Var<S>&);                                                    \
  template Var<S> sigmoid(const Var<S>&);                                                 \
  template Var<S> tanh(const Var<S>&);                                                    \
  template Var<S> clamp(const Var<S>&, S, S);                                             \
  template Var<S> sum(const Var<S>&);                                                     \
  template Var<S> mean(const Var<S>&);                                                    \
  template Var<S> sum(const Var<S>&, Index, bool);                                        \
  template Var<S> mean(const Var<S>&, Index, bool);                                       \
  template Var<S> reshape(const Var<S>&, Shape);                                          \
  template Var<S> concat(const std::vector<Var<S>>&, Index);                              \
  template Var<S> slice(const Var<S>&, Index, Index, Index);                              \
  template Var<S> transpose(const Var<S>&);                                               \
  template Var<S> gather_rows(const Var<S>&, const std::vector<Index>&);                  \
  template Var<S> matmul(const Var<S>&, const Var<S>&);                                   \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, Conv2dOptions);                    \
  template Var<S> conv2d(const Var<S>&, const Var<S>&, const Var<S>&, Conv2dOptions);     \
  template Var<S> upsample_nearest(const Var<S>&, Index);                                 \
  template Var<S> group_norm(const Var<S>&, Index, S);                                    \
  template Var<S> softmax(const Var<S>&);                                                 \
  template Var<S> log_softmax(const Var<S>&);                                             \
  template Var<S> l2_normalize_rows(const Var<S>&, S);                                    \
  template Var<S> mse(const Var<S>&, const Var<S>&);                                      \
  template Var<S> cross_entropy(const Var<S>&, const std::vector<Index>&);                \
  template Var<S> linear(const Var<S>&, const Var<S>&, const Var<S>&);

SEEDSELECT_INSTANTIATE_OPS(float)
SEEDSELECT_INSTANTIATE_OPS(double)

}  // namespace seedselect::ad
