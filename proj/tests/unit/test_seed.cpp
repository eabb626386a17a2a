#include <cmath>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "seedselect/autodiff/grad_check.hpp"
#include "seedselect/nn/layers.hpp"
#include "seedselect/seed/bootstrap.hpp"

using namespace seedselect;
using ad::Tensor;
using ad::Var;
using seed::StopReason;
using seed::StopRule;

namespace {

Tensor<double> rand_t(ad::Shape s, Rng& rng) {
  Tensor<double> t(std::move(s));
  for (long i = 0; i < t.size(); ++i) t[i] = rng.uniform(-1, 1);
  return t;
}

std::optional<StopReason> feed(StopRule& r, const std::vector<double>& losses) {
  std::optional<StopReason> last;
  for (double l : losses) {
    last = r.update(l);
    if (last) return last;
  }
  return last;
}

}  // namespace

TEST_CASE("semantic loss is the Euclidean distance to the centroid") {
  Tensor<double> v({1, 3}), mu({3});
  v[0] = 1; v[1] = 2; v[2] = 2;
  mu[0] = 0; mu[1] = 0; mu[2] = 0;
  CHECK(seed::semantic_loss(Var<double>::constant(v), mu).item() == doctest::Approx(3.0));
  Tensor<double> rows({2, 2}), cent({2, 2});
  rows[0] = 3; rows[1] = 4; rows[2] = 1; rows[3] = 1;
  cent[0] = 0; cent[1] = 0; cent[2] = 1; cent[3] = 0;
  const auto r = seed::semantic_loss_rows(Var<double>::constant(rows), cent);
  CHECK(r.value()[0] == doctest::Approx(5.0));
  CHECK(r.value()[1] == doctest::Approx(1.0));
}

TEST_CASE("appearance loss is the mean of per-reference latent MSEs") {
  Rng rng(1);
  const auto z0 = rand_t({1, 2, 2, 2}, rng);
  const auto refs = rand_t({3, 2, 2, 2}, rng);
  double want = 0.0;
  for (int k = 0; k < 3; ++k) {
    double mse = 0.0;
    for (int j = 0; j < 8; ++j) mse += std::pow(refs[k * 8 + j] - z0[j], 2);
    want += mse / 8.0;
  }
  want /= 3.0;
  CHECK(seed::appearance_loss(Var<double>::constant(z0), refs).item() == doctest::Approx(want).epsilon(1e-12));
  // The reference itself is a zero-loss point for k = 1.
  CHECK(seed::appearance_loss(Var<double>::constant(z0), z0).item() == 0.0);
}

TEST_CASE("total loss endpoints and range") {
  Tensor<double> s({1}), a({1});
  s[0] = 2.5;
  a[0] = 0.75;
  const auto sv = Var<double>::constant(s), av = Var<double>::constant(a);
  CHECK(seed::total_loss(sv, av, 1.0).item() == 2.5);
  CHECK(seed::total_loss(sv, av, 0.0).item() == 0.75);
  CHECK(seed::total_loss(sv, av, 0.9).item() == doctest::Approx(0.9 * 2.5 + 0.1 * 0.75));
  CHECK_THROWS_AS(seed::total_loss(sv, av, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(seed::total_loss(sv, av, -0.1), std::invalid_argument);
}

TEST_CASE("contrastive semantic loss") {
  std::map<long, Tensor<double>> table;
  Tensor<double> c0({2}), c1({2});
  c0[0] = 1; c0[1] = 0;
  c1[0] = 0; c1[1] = 1;
  table[0] = c0;
  table[1] = c1;
  Tensor<double> v({1, 2});
  v[0] = 1; v[1] = 0;
  const double d0 = 0.0, d1 = std::sqrt(2.0);
  const double want = -std::log(std::exp(-d0) / (std::exp(-d0) + std::exp(-d1)));
  CHECK(seed::contrastive_semantic_loss(Var<double>::constant(v), table, 0).item() == doctest::Approx(want));
  CHECK_THROWS(seed::contrastive_semantic_loss(Var<double>::constant(v), table, 5));
  CHECK_THROWS(seed::contrastive_semantic_loss(Var<double>::constant(v), {}, 0));
}

TEST_CASE("stop rule: increase limit") {
  StopRule r(100, 3, 50);
  CHECK(feed(r, {5, 4, 3, 3.1, 3.2, 3.3}) == std::nullopt);
  CHECK(r.update(3.4) == StopReason::IncreaseLimit);
}

TEST_CASE("stop rule: a decrease resets the increase count") {
  StopRule r(100, 2, 50);
  CHECK(feed(r, {5, 5.1, 5.2, 4.0, 4.1, 4.2}) == std::nullopt);
  CHECK(r.update(4.3) == StopReason::IncreaseLimit);
}

TEST_CASE("stop rule: plateau over the window") {
  StopRule r(100, 3, 4, 1e-3);
  CHECK(feed(r, {10, 9, 8, 7}) == std::nullopt);
  // Best stays 7 for the next iterations while the loss wiggles without
  // four consecutive increases.
  CHECK(feed(r, {7.5, 7.2, 7.6, 7.3}) == StopReason::Plateau);
  CHECK(r.best() == 7.0);
  CHECK(r.best_index() == 3);
}

TEST_CASE("stop rule: max iterations and non-finite") {
  StopRule r(3, 3, 10);
  CHECK(feed(r, {3, 2}) == std::nullopt);
  CHECK(r.update(1) == StopReason::MaxIters);
  StopRule n(10);
  CHECK(n.update(1.0) == std::nullopt);
  CHECK(n.update(std::numeric_limits<double>::quiet_NaN()) == StopReason::NonFinite);
  CHECK_THROWS(StopRule(-1));
  CHECK_THROWS(StopRule(5, 0));
}

TEST_CASE("optimize_batch on a quadratic: rows are independent") {
  // Objective: per-row total = |x - target_r|^2, target depends on the row id.
  seed::BatchObjective<double> obj = [](const Var<double>& x, const std::vector<long>& rows) {
    const long m = x.dim(0), per = x.size() / m;
    Tensor<double> t(x.shape());
    for (long i = 0; i < m; ++i)
      for (long j = 0; j < per; ++j) t[i * per + j] = static_cast<double>(rows[static_cast<std::size_t>(i)]) + 0.1 * j;
    auto d = x - Var<double>::constant(t);
    auto per_row = ad::sum(ad::reshape(d * d, {m, per}), 1);
    seed::RowLosses<double> out{per_row, {}, {}};
    for (long i = 0; i < m; ++i) {
      out.semantic.push_back(per_row.value()[i]);
      out.appearance.push_back(0.0);
    }
    return out;
  };
  Rng rng(2);
  std::vector<Tensor<double>> inits;
  for (int i = 0; i < 4; ++i) inits.push_back(rand_t({1, 2, 1, 2}, rng));
  seed::OptimizationConfig cfg;
  cfg.learning_rate = 0.1;
  cfg.plateau_tol = 1e-6;
  cfg.patience = 1000;
  cfg.plateau_window = 1000;
  const auto batch = seed::optimize_batch(obj, inits, cfg, 150);
  for (std::size_t i = 0; i < inits.size(); ++i) {
    // The same row run alone: the row id must be preserved for the target.
    seed::BatchObjective<double> single = [&](const Var<double>& x, const std::vector<long>&) {
      return obj(x, {static_cast<long>(i)});
    };
    const auto alone = seed::optimize_batch(single, {inits[i]}, cfg, 150).front();
    CHECK(alone.iterations == batch[i].iterations);
    CHECK(alone.stop_reason == batch[i].stop_reason);
    CHECK(alone.best_loss == batch[i].best_loss);
    for (long j = 0; j < alone.seed.size(); ++j) CHECK(alone.seed[j] == batch[i].seed[j]);
    INFO("stop reason " << seed::to_string(batch[i].stop_reason) << " after " << batch[i].iterations);
    CHECK(batch[i].best_loss < 1e-2);
    CHECK(batch[i].history[static_cast<std::size_t>(batch[i].best_iteration)].total == batch[i].best_loss);
  }
  const auto none = seed::optimize_batch(obj, inits, cfg, 0);
  CHECK(none[0].history.empty());
  for (long j = 0; j < inits[0].size(); ++j) CHECK(none[0].seed[j] == inits[0][j]);
  CHECK_THROWS_AS(seed::optimize_batch(obj, {Tensor<double>({2, 2, 1, 2})}, cfg, 5), ShapeError);
}

TEST_CASE("optimization config validation") {
  seed::OptimizationConfig c;
  CHECK_NOTHROW(c.validate());
  c.t_stab = 7;
  CHECK_THROWS(c.validate());
  c = {};
  c.lambda = 2;
  CHECK_THROWS(c.validate());
  c = {};
  c.learning_rate = 0;
  CHECK_THROWS(c.validate());
}

TEST_CASE("reference set caches and subsets") {
  fixtures::TinyStack<double> m;
  const auto st = m.stack();
  seed::ReferenceSet<double> refs(fixtures::random_images(4, 16, 3), 1, st);
  CHECK(refs.size() == 4);
  CHECK(refs.latents().shape() == ad::Shape{4, 4, 4, 4});
  CHECK(refs.embeddings().shape() == ad::Shape{4, 8});
  const auto c = models::centroid_of_rows(refs.embeddings());
  for (long j = 0; j < 8; ++j) CHECK(refs.centroid()[j] == c[j]);
  const auto sub = refs.subset({2, 2, 0});
  CHECK(sub.size() == 3);
  CHECK(sub.target_class() == 1);
  for (long j = 0; j < 64; ++j) {
    CHECK(sub.latents()[j] == refs.latents()[2 * 64 + j]);
    CHECK(sub.latents()[128 + j] == refs.latents()[j]);
  }
  double manual = 0.0;
  for (long j = 0; j < 8; ++j) {
    manual = (2 * refs.embeddings()[2 * 8 + j] + refs.embeddings()[j]) / 3.0;
    CHECK(sub.centroid()[j] == doctest::Approx(manual).epsilon(1e-12));
  }
}

TEST_CASE("seedselect objective gradient matches finite differences") {
  fixtures::TinyStack<double> m;
  const auto st = m.stack();
  seed::ReferenceSet<double> refs(fixtures::random_images(3, 16, 4), 2, st);
  seed::OptimizationConfig cfg;
  cfg.sampling_steps = 2;
  cfg.t_stab = 1;
  cfg.lambda = 0.6;
  auto obj = seed::seedselect_objective(st, seed::ObjectiveTargets<double>{{&refs}, nullptr}, cfg);
  Rng rng(8);
  const auto point = diffusion::random_seed<double>(m.dn.config(), 1, rng);
  auto f = [&](const Var<double>& s) { return ad::sum(obj(s, {0}).total); };
  CHECK(ad::grad_check(f, point, 1e-5) < 1e-4);
}

TEST_CASE("optimize_seed lowers the objective and records a trace") {
  fixtures::TinyStack<float> m;
  const auto st = m.stack();
  seed::ReferenceSet<float> refs(fixtures::random_images(3, 16, 5), 0, st);
  seed::OptimizationConfig cfg;
  cfg.sampling_steps = 3;
  cfg.max_iters = 15;
  cfg.plateau_window = 20;
  cfg.seed = 9;
  const auto r = seed::optimize_seed(st, refs, cfg);
  REQUIRE(!r.history.empty());
  CHECK(r.best_loss <= r.history.front().total);
  CHECK(r.iterations == static_cast<int>(r.history.size()));
  std::ostringstream trace;
  seed::write_trace(trace, r);
  const std::string text = trace.str();
  CHECK(text.substr(0, text.find('\n')) == "iter\ttotal\tsemantic\tappearance\tseed_norm");
  CHECK(std::count(text.begin(), text.end(), '\n') == r.iterations + 1);
  // Same seed, same result.
  const auto again = seed::optimize_seed(st, refs, cfg);
  CHECK(again.best_loss == r.best_loss);
}

TEST_CASE("bootstrap draws subsets and starts every subset at the warm seed") {
  fixtures::TinyStack<float> m;
  const auto st = m.stack();
  seed::ReferenceSet<float> refs(fixtures::random_images(4, 16, 6), 1, st);
  seed::OptimizationConfig cfg;
  cfg.sampling_steps = 2;
  cfg.t_stab = 1;
  seed::BootstrapPlan plan;
  plan.warm_iters = 4;
  plan.subset_iters = 3;
  plan.batch = 2;
  Rng rng(10);
  const auto res = seed::bootstrap_generate(st, refs, 5, plan, cfg, rng);
  CHECK(res.subsets.size() == 5);
  CHECK(res.draws.size() == 5);
  CHECK(res.images.shape() == ad::Shape{5, 3, 16, 16});
  CHECK(res.latents.shape() == ad::Shape{5, 4, 4, 4});
  for (const auto& d : res.draws) {
    CHECK(d.size() == 4);
    for (long r : d) CHECK((r >= 0 && r < 4));
  }
  for (const auto& s : res.subsets) {
    CHECK(s.iterations <= 3);
    CHECK(s.history.front().seed_norm == doctest::Approx(res.warm.final_seed_norm));
  }
  CHECK(res.mean_subset_iterations() <= 3.0);
  plan.full_subsets = true;
  Rng rng2(10);
  const auto full = seed::bootstrap_generate(st, refs, 2, plan, cfg, rng2);
  CHECK(full.draws[0] == std::vector<long>{0, 1, 2, 3});
  plan.batch = 0;
  CHECK_THROWS(seed::bootstrap_generate(st, refs, 2, plan, cfg, rng2));
}

TEST_CASE("generate_latents matches the sampler in any batch size") {
  fixtures::TinyStack<double> m;
  Rng rng(11);
  const auto seeds = diffusion::random_seed<double>(m.dn.config(), 5, rng);
  const std::vector<long> cls{0, 1, 2, 0, 1};
  const auto a = seed::generate_latents(m.dn, seeds, cls, {3, 2.0}, 2);
  const auto b = seed::generate_latents(m.dn, seeds, cls, {3, 2.0}, 5);
  for (long i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-10));
}
