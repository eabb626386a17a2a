#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "seedselect/autodiff/grad_check.hpp"
#include "seedselect/diffusion/sampler.hpp"
#include "seedselect/diffusion/schedule.hpp"
#include "seedselect/io/checkpoint.hpp"

using namespace seedselect;
using ad::Tensor;
using ad::Var;

TEST_CASE("noise schedule endpoints and cumulative product") {
  diffusion::NoiseSchedule s(1000, 1e-4, 2e-2);
  CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-12));
  CHECK(s.beta(1000) == doctest::Approx(2e-2).epsilon(1e-12));
  CHECK(s.alpha_bar(0) == 1.0);
  double prod = 1.0;
  for (int t = 1; t <= 1000; ++t) {
    prod *= 1.0 - s.beta(t);
    CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
  }
  CHECK(s.alpha_bar(1000) == doctest::Approx(prod).epsilon(1e-12));
  CHECK_THROWS(s.alpha_bar(1001));
}

TEST_CASE("sampling timesteps") {
  diffusion::NoiseSchedule s(1000);
  CHECK(s.sampling_timesteps(4) == std::vector<int>{1000, 750, 500, 250});
  CHECK(s.sampling_timesteps(7) == std::vector<int>{1000, 857, 714, 571, 428, 285, 142});
  CHECK(s.sampling_timesteps(1) == std::vector<int>{1000});
}

TEST_CASE("add_noise endpoints") {
  Rng rng(3);
  Tensor<double> z0({2, 4}), eps({2, 4});
  for (long i = 0; i < 8; ++i) {
    z0[i] = rng.normal();
    eps[i] = rng.normal();
  }
  diffusion::NoiseSchedule s(1000);
  const auto clean = diffusion::add_noise(Var<double>::constant(z0), 0, Var<double>::constant(eps), s);
  for (long i = 0; i < 8; ++i) CHECK(clean.value()[i] == z0[i]);
  const auto noisy = diffusion::add_noise(Var<double>::constant(z0), 500, Var<double>::constant(eps), s);
  const double ab = s.alpha_bar(500);
  for (long i = 0; i < 8; ++i) {
    CHECK(noisy.value()[i] == doctest::Approx(std::sqrt(ab) * z0[i] + std::sqrt(1 - ab) * eps[i]));
  }
}

TEST_CASE("guidance scale 1 and 0 are the conditional and unconditional predictions") {
  fixtures::TinyStack<double> m;
  Rng rng(4);
  const auto z = Var<double>::constant(diffusion::random_seed<double>(m.dn.config(), 3, rng));
  const std::vector<long> cls{0, 1, 2};
  const auto cond = m.dn.predict(z, {500, 500, 500}, cls);
  const auto uncond = m.dn.predict(z, {500, 500, 500}, {3, 3, 3});
  const auto g1 = m.dn.guided_predict(z, 500, cls, 1.0);
  const auto g0 = m.dn.guided_predict(z, 500, cls, 0.0);
  for (long i = 0; i < cond.size(); ++i) {
    CHECK(g1.value()[i] == cond.value()[i]);
    CHECK(g0.value()[i] == uncond.value()[i]);
  }
  const auto g75 = m.dn.guided_predict(z, 500, cls, 7.5);
  for (long i = 0; i < cond.size(); ++i) {
    const double want = uncond.value()[i] + 7.5 * (cond.value()[i] - uncond.value()[i]);
    CHECK(g75.value()[i] == doctest::Approx(want).epsilon(1e-12));
  }
  CHECK_THROWS_AS(m.dn.guided_predict(z, 500, {0, 1, 3}, 2.0), std::out_of_range);
  CHECK_THROWS(m.dn.predict(z, {500, 500, 500}, {0, 1, 4}));
}

TEST_CASE("denoiser rejects latents of the wrong shape") {
  fixtures::TinyStack<double> m;
  const auto bad = Var<double>::constant(Tensor<double>({1, 4, 8, 8}));
  CHECK_THROWS_AS(m.dn.predict(bad, {10}, {0}), ShapeError);
  CHECK_THROWS_AS(m.ae.decode(bad), ShapeError);
}

TEST_CASE("sampler trajectory layout and determinism") {
  fixtures::TinyStack<double> m;
  Rng rng(5);
  const auto seed = Var<double>::constant(diffusion::random_seed<double>(m.dn.config(), 2, rng));
  const auto a = diffusion::sample(m.dn, seed, {0, 2}, {3, 7.5});
  const auto b = diffusion::sample(m.dn, seed, {0, 2}, {3, 7.5});
  CHECK(a.latents.size() == 4);
  CHECK(a.predicted_x0.size() == 3);
  CHECK(a.timesteps == std::vector<int>{1000, 666, 333, 0});
  for (long i = 0; i < seed.size(); ++i) CHECK(a.latents.front().value()[i] == seed.value()[i]);
  for (long i = 0; i < seed.size(); ++i) {
    CHECK(a.final_latent().value()[i] == b.final_latent().value()[i]);
    // The last step lands on alpha_bar = 1, so z_0 is the last x0 estimate.
    CHECK(a.final_latent().value()[i] == a.predicted_x0.back().value()[i]);
  }
}

TEST_CASE("one DDIM step matches the closed form") {
  fixtures::TinyStack<double> m;
  Rng rng(6);
  const auto seed = Var<double>::constant(diffusion::random_seed<double>(m.dn.config(), 1, rng));
  const auto traj = diffusion::sample(m.dn, seed, {1}, {2, 3.0});
  const auto& s = m.dn.schedule();
  const int t = traj.timesteps[0], tn = traj.timesteps[1];
  const auto eps = m.dn.guided_predict(seed, t, {1}, 3.0);
  for (long i = 0; i < seed.size(); ++i) {
    const double x0 = (seed.value()[i] - std::sqrt(1 - s.alpha_bar(t)) * eps.value()[i]) / std::sqrt(s.alpha_bar(t));
    CHECK(traj.predicted_x0[0].value()[i] == doctest::Approx(x0).epsilon(1e-12));
    const double zn = std::sqrt(s.alpha_bar(tn)) * x0 + std::sqrt(1 - s.alpha_bar(tn)) * eps.value()[i];
    CHECK(traj.latents[1].value()[i] == doctest::Approx(zn).epsilon(1e-12));
  }
}

TEST_CASE("gradient through the sampler matches finite differences") {
  fixtures::TinyStack<double> m;
  Rng rng(7);
  const auto point = diffusion::random_seed<double>(m.dn.config(), 1, rng);
  Tensor<double> w(point.shape());
  for (long i = 0; i < w.size(); ++i) w[i] = rng.uniform(-1, 1);
  const auto wv = Var<double>::constant(w);
  auto f = [&](const Var<double>& s) {
    const auto traj = diffusion::sample(m.dn, s, {2}, {2, 4.0});
    return ad::sum(traj.final_latent() * wv);
  };
  CHECK(ad::grad_check(f, point, 1e-5) < 1e-5);
}

TEST_CASE("autoencoder round-trip shapes and latent scale") {
  fixtures::TinyStack<float> m;
  const auto x = Var<float>::constant(fixtures::random_images(2, 16, 8));
  m.ae.set_latent_scale(2.0);
  const auto z = m.ae.encode(x);
  CHECK(z.shape() == ad::Shape{2, 4, 4, 4});
  const auto zu = m.ae.encode_unscaled(x);
  for (long i = 0; i < z.size(); ++i) CHECK(z.value()[i] == doctest::Approx(2.0f * zu.value()[i]));
  const auto y = m.ae.decode(z);
  CHECK(y.shape() == ad::Shape{2, 3, 16, 16});
  for (long i = 0; i < y.size(); ++i) {
    CHECK(y.value()[i] >= 0.0f);
    CHECK(y.value()[i] <= 1.0f);
  }
}

TEST_CASE("autoencoder training reduces reconstruction error and normalizes latents") {
  diffusion::Autoencoder<float> ae(fixtures::TinyStack<float>::ae_config(), 3);
  nn::LabeledImages data;
  data.images = fixtures::random_images(16, 16, 9);
  // Smooth images are learnable by a tiny model.
  for (long i = 0; i < data.images.size(); ++i) data.images[i] = 0.5f + 0.4f * std::sin(0.1f * static_cast<float>(i % 97));
  data.labels.assign(16, 0);
  data.n_classes = 1;
  const auto before = diffusion::decode_all(ae, diffusion::encode_all(ae, data.images));
  const double mse0 = (before.data() - data.images.data()).square().mean();
  diffusion::AutoencoderTrainConfig cfg;
  cfg.epochs = 30;
  cfg.batch_size = 8;
  const auto log = diffusion::train_autoencoder(ae, data, cfg);
  CHECK(log.epoch_losses.size() == 30);
  const auto after = diffusion::decode_all(ae, diffusion::encode_all(ae, data.images));
  CHECK((after.data() - data.images.data()).square().mean() < mse0);
  const auto z = diffusion::encode_all(ae, data.images);
  const double mean = z.data().mean();
  CHECK(std::sqrt((z.data() - static_cast<float>(mean)).square().mean()) == doctest::Approx(1.0).epsilon(1e-3));
}

TEST_CASE("denoiser training is finite and reproducible") {
  auto run = [] {
    diffusion::Denoiser<float> dn(fixtures::TinyStack<float>::dn_config(), 2);
    Rng rng(1);
    const auto z = diffusion::random_seed<float>(dn.config(), 16, rng);
    std::vector<long> labels;
    for (long i = 0; i < 16; ++i) labels.push_back(i % 3);
    diffusion::DenoiserTrainConfig cfg;
    cfg.epochs = 3;
    cfg.batch_size = 8;
    cfg.seed = 4;
    auto log = diffusion::train_denoiser(dn, z, labels, cfg);
    return std::make_pair(log, dn.params().hash());
  };
  const auto a = run(), b = run();
  CHECK(a.second == b.second);
  REQUIRE(a.first.epoch_losses.size() == 3);
  for (double l : a.first.epoch_losses) CHECK(std::isfinite(l));
}

TEST_CASE("denoiser checkpoint round trip keeps the weight hash") {
  fixtures::TinyStack<float> m;
  m.dn.training_metadata()["train.epochs"] = "3";
  const auto bytes = io::encode_checkpoint(m.dn.to_checkpoint());
  const auto back = diffusion::Denoiser<float>::from_checkpoint(io::decode_checkpoint(bytes));
  CHECK(back.params().hash() == m.dn.params().hash());
  CHECK(back.config().width == m.dn.config().width);
  CHECK(back.training_metadata().at("train.epochs") == "3");
  CHECK_FALSE(back.params().trainable());
  CHECK_THROWS_AS(diffusion::Autoencoder<float>::from_checkpoint(io::decode_checkpoint(bytes)), FormatError);
}
