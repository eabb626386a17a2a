#include <cmath>
#include <functional>
#include <string>

#include "doctest.h"
#include "seedselect/autodiff/adam.hpp"
#include "seedselect/autodiff/grad_check.hpp"
#include "seedselect/autodiff/ops.hpp"
#include "seedselect/core/rng.hpp"

using namespace seedselect;
using namespace seedselect::ad;

namespace {

using VarD = Var<double>;
using Fn = std::function<VarD(const VarD&)>;

Tensor<double> random_tensor(Shape shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) t[i] = rng.uniform(lo, hi);
  return t;
}

/// Random point kept at least `margin` away from zero (kinks of relu/clamp).
Tensor<double> away_from_zero(Shape shape, Rng& rng, double margin) {
  Tensor<double> t(std::move(shape));
  for (Index i = 0; i < t.size(); ++i) {
    const double mag = rng.uniform(margin, 1.5);
    t[i] = rng.bernoulli(0.5) ? mag : -mag;
  }
  return t;
}

/// Scalarize an op output with fixed random weights so every output coordinate matters.
Fn weighted(std::function<VarD(const VarD&)> op, Shape out_shape, std::uint64_t seed) {
  Rng rng(seed);
  auto w = VarD::constant(random_tensor(std::move(out_shape), rng));
  return [op, w](const VarD& x) { return sum(op(x) * w); };
}

}  // namespace

TEST_CASE("forward examples") {
  auto a = VarD::constant(Tensor<double>({3}, {1, 2, 3}));
  auto b = VarD::constant(Tensor<double>({3}, {4, 5, 6}));
  auto c = a * b;
  CHECK(c.value()[0] == 4);
  CHECK(c.value()[1] == 10);
  CHECK(c.value()[2] == 18);

  auto m = VarD::constant(Tensor<double>({2, 3}, {1, 2, 3, 4, 5, 6}));
  auto z = VarD::constant(Tensor<double>::zeros({3, 1}));
  auto mz = matmul(m, z);
  CHECK(mz.shape() == Shape{2, 1});
  CHECK(mz.value().data().abs().maxCoeff() == 0.0);

  // Delta kernel: valid convolution returns the central crop.
  Tensor<double> img({1, 1, 5, 5});
  for (Index i = 0; i < 25; ++i) img[i] = static_cast<double>(i);
  Tensor<double> k({1, 1, 3, 3});
  k[4] = 1.0;
  auto crop = conv2d(VarD::constant(img), VarD::constant(k));
  REQUIRE(crop.shape() == Shape{1, 1, 3, 3});
  for (Index r = 0; r < 3; ++r)
    for (Index col = 0; col < 3; ++col) CHECK(crop.value()[r * 3 + col] == img[(r + 1) * 5 + col + 1]);
}

TEST_CASE("shape errors name both shapes") {
  auto a = VarD::constant(Tensor<double>::zeros({2, 3}));
  auto b = VarD::constant(Tensor<double>::zeros({4, 5}));
  try {
    (void)matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("[2,3]") != std::string::npos);
    CHECK(msg.find("[4,5]") != std::string::npos);
  }
  CHECK_THROWS_AS((void)add(a, b), ShapeError);
  CHECK_THROWS_AS(Tensor<double>(Shape{0, 2}), ShapeError);
}

TEST_CASE("backward examples") {
  auto x = VarD::leaf(Tensor<double>({3}, {1, 2, 3}));
  auto g = backward(sum(square(x)), x);
  CHECK(g[0] == 2);
  CHECK(g[1] == 4);
  CHECK(g[2] == 6);

  auto y = VarD::leaf(Tensor<double>({2}, {-1, 0.5}));
  auto gy = backward(sum(relu(y)), y);
  CHECK(gy[0] == 0);
  CHECK(gy[1] == 1);

  // Untouched leaf gets zeros.
  auto unused = VarD::leaf(Tensor<double>({2}, {7, 8}));
  auto both = backward(sum(square(x)), std::vector<VarD>{x, unused});
  CHECK(both[1].data().abs().maxCoeff() == 0.0);

  CHECK_THROWS_AS(backward(square(x), x), ShapeError);
}

TEST_CASE("grad_check examples") {
  Rng rng(1);
  auto p = random_tensor({6}, rng);
  CHECK(grad_check([](const VarD& x) { return scale(sum(x), 3.0); }, p, 1e-3) < 1e-9);
  CHECK(grad_check([](const VarD& x) { return sum(square(x)); }, Tensor<double>({4}, 1.0), 1e-3) < 1e-7);
}

TEST_CASE("every primitive matches central differences") {
  Rng rng(42);
  const double eps = 1e-6;
  const double tol = 1e-4;
  auto check = [&](const char* name, const Fn& f, const Tensor<double>& x) {
    auto r = grad_check_detailed(f, x, eps);
    INFO(name << " worst index " << r.worst_index << " analytic " << r.analytic << " numeric " << r.numeric);
    CHECK(r.max_relative_error <= tol);
  };

  for (int trial = 0; trial < 3; ++trial) {
    const Index n = 2 + static_cast<Index>(rng.below(5));
    const Index m = 2 + static_cast<Index>(rng.below(5));
    const Shape s{n, m};
    const auto seed = rng.next();
    auto other = VarD::constant(away_from_zero(s, rng, 0.3));
    auto row = VarD::constant(away_from_zero({m}, rng, 0.3));
    auto colv = VarD::constant(away_from_zero({n, 1}, rng, 0.3));

    check("add", weighted([&](const VarD& x) { return x + other; }, s, seed), random_tensor(s, rng));
    check("add_bcast", weighted([&](const VarD& x) { return x + row; }, s, seed), random_tensor(s, rng));
    check("add_bcast_lhs", weighted([&](const VarD& x) { return row + x; }, s, seed), random_tensor(s, rng));
    check("sub_bcast_rhs", weighted([&](const VarD& x) { return other - x; }, s, seed), random_tensor({m}, rng));
    check("mul", weighted([&](const VarD& x) { return x * other; }, s, seed), random_tensor(s, rng));
    check("mul_bcast", weighted([&](const VarD& x) { return colv * x; }, s, seed), random_tensor(s, rng));
    check("mul_reduce", weighted([&](const VarD& x) { return other * x; }, s, seed), random_tensor({n, 1}, rng));
    check("div", weighted([&](const VarD& x) { return other / x; }, s, seed), away_from_zero(s, rng, 0.5));
    check("div_num", weighted([&](const VarD& x) { return x / colv; }, s, seed), random_tensor(s, rng));
    check("scale", weighted([](const VarD& x) { return scale(x, 2.5); }, s, seed), random_tensor(s, rng));
    check("add_scalar", weighted([](const VarD& x) { return add_scalar(x, 0.7); }, s, seed), random_tensor(s, rng));
    check("exp", weighted([](const VarD& x) { return exp(x); }, s, seed), random_tensor(s, rng));
    check("log", weighted([](const VarD& x) { return log(x); }, s, seed), random_tensor(s, rng, 0.5, 2.0));
    check("sqrt", weighted([](const VarD& x) { return sqrt(x); }, s, seed), random_tensor(s, rng, 0.5, 2.0));
    check("square", weighted([](const VarD& x) { return square(x); }, s, seed), random_tensor(s, rng));
    check("relu", weighted([](const VarD& x) { return relu(x); }, s, seed), away_from_zero(s, rng, 0.1));
    check("silu", weighted([](const VarD& x) { return silu(x); }, s, seed), random_tensor(s, rng));
    check("sigmoid", weighted([](const VarD& x) { return sigmoid(x); }, s, seed), random_tensor(s, rng));
    check("tanh", weighted([](const VarD& x) { return tanh(x); }, s, seed), random_tensor(s, rng));
    check("clamp", weighted([](const VarD& x) { return clamp(x, -0.05, 0.05); }, s, seed), away_from_zero(s, rng, 0.1));
    check("sum", [](const VarD& x) { return square(sum(x)); }, random_tensor(s, rng));
    check("mean", [](const VarD& x) { return square(mean(x)); }, random_tensor(s, rng));
    check("sum_axis0", weighted([](const VarD& x) { return sum(x, 0); }, {m}, seed), random_tensor(s, rng));
    check("mean_axis1", weighted([](const VarD& x) { return mean(x, 1, true); }, {n, 1}, seed), random_tensor(s, rng));
    check("reshape", weighted([&](const VarD& x) { return reshape(x, Shape{m, n}); }, {m, n}, seed), random_tensor(s, rng));
    check("transpose", weighted([](const VarD& x) { return transpose(x); }, {m, n}, seed), random_tensor(s, rng));
    check("concat", weighted([&](const VarD& x) { return concat<double>({other, x, x}, 1); }, {n, 3 * m}, seed),
          random_tensor(s, rng));
    check("slice", weighted([&](const VarD& x) { return slice(x, 1, 1, m - 1); }, {n, m - 1}, seed), random_tensor(s, rng));
    check("gather_rows", weighted([](const VarD& x) { return gather_rows(x, {1, 0, 1}); }, {3, m}, seed),
          random_tensor(s, rng));
    auto rhs = VarD::constant(random_tensor({m, 3}, rng));
    auto lhs = VarD::constant(random_tensor({4, n}, rng));
    check("matmul_a", weighted([&](const VarD& x) { return matmul(x, rhs); }, {n, 3}, seed), random_tensor(s, rng));
    check("matmul_b", weighted([&](const VarD& x) { return matmul(lhs, x); }, {4, m}, seed), random_tensor(s, rng));
    check("softmax", weighted([](const VarD& x) { return softmax(x); }, s, seed), random_tensor(s, rng));
    check("log_softmax", weighted([](const VarD& x) { return log_softmax(x); }, s, seed), random_tensor(s, rng));
    check("l2_normalize", weighted([](const VarD& x) { return l2_normalize_rows(x); }, s, seed), random_tensor(s, rng));
    check("cross_entropy", [n](const VarD& x) {
      std::vector<Index> labels;
      for (Index i = 0; i < n; ++i) labels.push_back(i % 2);
      return cross_entropy(x, labels);
    }, random_tensor(s, rng));
  }

  // Image primitives.
  const Shape img{2, 4, 5, 6};
  auto w = VarD::constant(random_tensor({3, 4, 3, 3}, rng));
  auto b = VarD::constant(random_tensor({3}, rng));
  auto xi = VarD::constant(random_tensor(img, rng));
  check("conv_x", weighted([&](const VarD& x) { return conv2d(x, w, b, {1, 1}); }, {2, 3, 5, 6}, 7), random_tensor(img, rng));
  check("conv_stride", weighted([&](const VarD& x) { return conv2d(x, w, {2, 1}); }, {2, 3, 3, 3}, 8), random_tensor(img, rng));
  check("conv_w", weighted([&](const VarD& k) { return conv2d(xi, k, b, {1, 1}); }, {2, 3, 5, 6}, 9),
        random_tensor({3, 4, 3, 3}, rng));
  auto w_small = VarD::constant(random_tensor({3, 4, 3, 3}, rng));
  check("conv_b", weighted([&](const VarD& bb) { return conv2d(xi, w_small, bb, {2, 0}); }, {2, 3, 2, 2}, 10),
        random_tensor({3}, rng));
  auto w1 = VarD::constant(random_tensor({2, 4, 1, 1}, rng));
  check("conv_1x1", weighted([&](const VarD& x) { return conv2d(x, w1); }, {2, 2, 5, 6}, 11), random_tensor(img, rng));
  check("upsample", weighted([](const VarD& x) { return upsample_nearest(x, 2); }, {2, 4, 10, 12}, 12),
        random_tensor(img, rng));
  check("group_norm", weighted([](const VarD& x) { return group_norm(x, 2); }, img, 13), random_tensor(img, rng));
}

TEST_CASE("random 3-layer conv net gradient at eps 1e-3") {
  Rng rng(2024);
  auto w1 = VarD::constant(random_tensor({4, 3, 3, 3}, rng, -0.5, 0.5));
  auto w2 = VarD::constant(random_tensor({4, 4, 3, 3}, rng, -0.5, 0.5));
  auto w3 = VarD::constant(random_tensor({2, 4, 3, 3}, rng, -0.5, 0.5));
  auto b1 = VarD::constant(random_tensor({4}, rng));
  auto target = VarD::constant(random_tensor({1, 2, 2, 2}, rng));
  Fn net = [&](const VarD& x) {
    auto h = silu(conv2d(x, w1, b1, {1, 1}));
    h = tanh(conv2d(h, w2, {2, 1}));
    h = conv2d(h, w3, {1, 0});
    return sum(square(h - target));
  };
  auto x0 = random_tensor({1, 3, 8, 8}, rng);
  auto r = grad_check_detailed(net, x0, 1e-3);
  INFO("worst " << r.worst_index << " analytic " << r.analytic << " numeric " << r.numeric);
  CHECK(r.max_relative_error <= 1e-4);
}

TEST_CASE("backward is deterministic and linear in the loss") {
  Rng rng(5);
  auto w = VarD::constant(random_tensor({3, 2, 3, 3}, rng));
  auto x = VarD::leaf(random_tensor({1, 2, 6, 6}, rng));
  auto f1 = [&] { return sum(square(silu(conv2d(x, w, {1, 1})))); };
  auto f2 = [&] { return mean(sigmoid(conv2d(x, w))); };
  auto ga = backward(f1(), x);
  auto gb = backward(f1(), x);
  CHECK((ga.data() == gb.data()).all());

  auto g1 = backward(f1(), x);
  auto g2 = backward(f2(), x);
  auto g12 = backward(f1() + f2(), x);
  CHECK((g12.data() - (g1.data() + g2.data())).abs().maxCoeff() < 1e-12);
}

TEST_CASE("adam minimizes a quadratic") {
  auto x = VarD::leaf(Tensor<double>({2}, {3.0, -2.0}));
  Adam<double> opt({x}, AdamConfig{0.1});
  for (int i = 0; i < 500; ++i) opt.step({backward(sum(square(x)), x)});
  CHECK(x.value().data().abs().maxCoeff() < 1e-2);
}
