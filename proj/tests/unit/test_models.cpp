#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "seedselect/autodiff/grad_check.hpp"
#include "seedselect/models/classifier.hpp"
#include "seedselect/models/embedder.hpp"

using namespace seedselect;
using ad::Tensor;
using ad::Var;

namespace {

nn::LabeledImages tiny_labeled(long per_class, long classes, std::uint64_t seed) {
  nn::LabeledImages d;
  d.images = fixtures::random_images(per_class * classes, 16, seed);
  d.n_classes = classes;
  for (long i = 0; i < per_class * classes; ++i) d.labels.push_back(i % classes);
  return d;
}

// Class c brightens channel c % 3, so the classes are separable.
nn::LabeledImages separable(long per_class, long classes, std::uint64_t seed) {
  auto d = tiny_labeled(per_class, classes, seed);
  const long plane = 16 * 16;
  for (long i = 0; i < d.size(); ++i) {
    float* p = d.images.ptr() + (i * 3 + d.labels[i] % 3) * plane;
    for (long j = 0; j < plane; ++j) p[j] = 0.5f + 0.5f * p[j];
  }
  return d;
}

// Direct per-anchor evaluation of the supervised contrastive loss.
double supcon_oracle(const Tensor<double>& z, const std::vector<long>& y, double tau) {
  const long n = z.dim(0), d = z.dim(1);
  auto dot = [&](long a, long b) {
    double s = 0;
    for (long k = 0; k < d; ++k) s += z[a * d + k] * z[b * d + k];
    return s / tau;
  };
  double total = 0;
  long anchors = 0;
  for (long i = 0; i < n; ++i) {
    double denom = 0;
    for (long a = 0; a < n; ++a)
      if (a != i) denom += std::exp(dot(i, a));
    double acc = 0;
    long p = 0;
    for (long j = 0; j < n; ++j) {
      if (j == i || y[j] != y[i]) continue;
      acc += dot(i, j) - std::log(denom);
      ++p;
    }
    if (p == 0) continue;
    total += -acc / static_cast<double>(p);
    ++anchors;
  }
  return total / static_cast<double>(anchors);
}

}  // namespace

TEST_CASE("embedder output rows have unit norm") {
  fixtures::TinyStack<double> m;
  const auto e = m.emb.embed(Var<double>::constant(fixtures::random_images(5, 16, 1).cast<double>())).value();
  REQUIRE(e.shape() == ad::Shape{5, 8});
  for (long i = 0; i < 5; ++i) {
    double s = 0;
    for (long k = 0; k < 8; ++k) s += e[i * 8 + k] * e[i * 8 + k];
    CHECK(std::sqrt(s) == doctest::Approx(1.0).epsilon(1e-9));
  }
}

TEST_CASE("embedder refuses to run before training or loading") {
  models::Embedder<float> e({16, 3, 4, 8}, 1);
  CHECK_FALSE(e.ready());
  CHECK_THROWS(e.embed(Var<float>::constant(fixtures::random_images(1, 16, 2))));
  e.mark_ready();
  CHECK_NOTHROW(e.embed(Var<float>::constant(fixtures::random_images(1, 16, 2))));
}

TEST_CASE("supcon loss matches a direct evaluation") {
  Rng rng(3);
  Tensor<double> z({6, 4});
  for (long i = 0; i < 6; ++i) {
    double s = 0;
    for (long k = 0; k < 4; ++k) {
      z[i * 4 + k] = rng.normal();
      s += z[i * 4 + k] * z[i * 4 + k];
    }
    for (long k = 0; k < 4; ++k) z[i * 4 + k] /= std::sqrt(s);
  }
  const std::vector<long> y{0, 1, 0, 2, 1, 0};  // class 2 has no positive
  const double got = models::supcon_loss(Var<double>::constant(z), y, 0.1).item();
  CHECK(got == doctest::Approx(supcon_oracle(z, y, 0.1)).epsilon(1e-9));
  CHECK_THROWS(models::supcon_loss(Var<double>::constant(z), {0, 1, 2, 3, 4, 5}, 0.1));
  CHECK_THROWS_AS(models::supcon_loss(Var<double>::constant(z), {0, 1}, 0.1), ShapeError);
}

TEST_CASE("supcon loss gradient") {
  Rng rng(4);
  Tensor<double> z({4, 3});
  for (long i = 0; i < z.size(); ++i) z[i] = rng.normal();
  auto f = [](const Var<double>& v) { return models::supcon_loss(ad::l2_normalize_rows(v), {0, 0, 1, 1}, 0.5); };
  CHECK(ad::grad_check(f, z, 1e-6) < 1e-6);
}

TEST_CASE("centroids are plain means of embeddings") {
  fixtures::TinyStack<double> m;
  const auto imgs = fixtures::random_images(3, 16, 5);
  const auto e = models::embed_all(m.emb, imgs);
  const auto c = models::centroid(m.emb, imgs);
  for (long k = 0; k < 8; ++k) CHECK(c[k] == doctest::Approx((e[k] + e[8 + k] + e[16 + k]) / 3.0));
}

TEST_CASE("embedder training lowers the contrastive loss") {
  models::Embedder<float> e({16, 3, 4, 8}, 6);
  models::EmbedderTrainConfig cfg;
  cfg.epochs = 4;
  cfg.steps_per_epoch = 15;
  cfg.per_class = 4;
  cfg.seed = 1;
  const auto log = models::train_embedder(e, separable(6, 3, 7), cfg);
  REQUIRE(log.epoch_losses.size() == 4);
  CHECK(log.epoch_losses.back() < log.epoch_losses.front());
  CHECK(e.ready());
  const auto back = models::Embedder<float>::from_checkpoint(io::decode_checkpoint(io::encode_checkpoint(e.to_checkpoint())));
  CHECK(back.params().hash() == e.params().hash());
  CHECK(back.ready());
}

TEST_CASE("classifier probabilities sum to one") {
  models::Classifier<double> c({16, 3, 4, 3}, 1);
  c.mark_ready();
  const auto p = c.classify(Var<double>::constant(fixtures::random_images(4, 16, 8).cast<double>())).value();
  REQUIRE(p.shape() == ad::Shape{4, 3});
  for (long i = 0; i < 4; ++i) CHECK(p[i * 3] + p[i * 3 + 1] + p[i * 3 + 2] == doctest::Approx(1.0));
}

TEST_CASE("an empty synthetic set reproduces real-only training") {
  const auto real = tiny_labeled(4, 3, 9);
  models::ClassifierTrainConfig cfg;
  cfg.epochs = 2;
  cfg.steps_per_epoch = 5;
  cfg.per_class = 2;
  cfg.seed = 3;
  models::Classifier<float> a({16, 3, 4, 3}, 2), b({16, 3, 4, 3}, 2), c({16, 3, 4, 3}, 2);
  models::train_classifier(a, real, cfg);
  nn::LabeledImages empty;
  empty.n_classes = 3;
  models::train_classifier(b, real, cfg, &empty);
  CHECK(a.params().hash() == b.params().hash());
  models::train_classifier(c, real, cfg, &real);
  CHECK(a.params().hash() != c.params().hash());
}

TEST_CASE("balanced accuracy and per-class accuracy") {
  CHECK(models::balanced_accuracy({1.0, 0.5, 0.0}) == doctest::Approx(0.5));
  CHECK(models::balanced_accuracy({1.0, std::nan(""), 0.0}) == doctest::Approx(0.5));
  models::Classifier<float> c({16, 3, 4, 2}, 3);
  c.mark_ready();
  nn::LabeledImages d = tiny_labeled(3, 2, 10);
  d.n_classes = 3;  // class 2 has no rows
  const auto pred = models::predict_labels(c, d.images);
  const auto acc = models::per_class_accuracy(c, d);
  REQUIRE(acc.size() == 3);
  CHECK(std::isnan(acc[2]));
  for (long cls = 0; cls < 2; ++cls) {
    double hits = 0;
    for (long i = 0; i < d.size(); ++i) hits += (d.labels[i] == cls && pred[i] == cls);
    CHECK(acc[cls] == doctest::Approx(hits / 3.0));
  }
}
