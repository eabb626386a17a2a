#include "seedselect/pipeline/experiment.hpp"

#include <chrono>
#include <fstream>
#include <sstream>
#include <thread>

#include "json.hpp"
#include "seedselect/core/log.hpp"
#include "seedselect/eval/augmentation.hpp"
#include "seedselect/eval/clustering.hpp"
#include "seedselect/eval/fid.hpp"
#include "seedselect/eval/ndb.hpp"
#include "seedselect/eval/stats.hpp"
#include "seedselect/io/image.hpp"
#include "seedselect/nn/layers.hpp"

namespace seedselect::pipeline {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Stream ids for Rng::mix(seed, id); resolved() uses 1..6.
namespace stream {
constexpr std::uint64_t kModelInit = 7, kBaselinePool = 10, kSeedSelectPool = 11, kLambda = 12, kTiming = 13,
                        kAugment = 14, kMetrics = 15;
}

Tensor<float> GeneratedPool::class_images(Index cls, Index n) const {
  if (n > per_class) throw std::out_of_range("pool holds " + std::to_string(per_class) + " images per class");
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i) rows.push_back(cls * per_class + i);
  return nn::gather(images.images, rows);
}

nn::LabeledImages GeneratedPool::head(Index n) const {
  if (n > per_class) throw std::out_of_range("pool holds " + std::to_string(per_class) + " images per class");
  nn::LabeledImages out;
  std::vector<Index> rows;
  for (Index c = 0; c < images.n_classes; ++c) {
    for (Index i = 0; i < n; ++i) {
      rows.push_back(c * per_class + i);
      out.labels.push_back(c);
    }
  }
  out.images = nn::gather(images.images, rows);
  out.n_classes = images.n_classes;
  return out;
}

Tensor<float> GeneratedPool::interleaved(Index n) const {
  const Index c = images.n_classes;
  if ((n + c - 1) / c > per_class) throw std::out_of_range("pool too small for " + std::to_string(n) + " samples");
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i) rows.push_back((i % c) * per_class + i / c);
  return nn::gather(images.images, rows);
}

namespace {

Tensor<float> interleave_test(const nn::LabeledImages& test, Index n) {
  std::vector<std::vector<Index>> by_class;
  for (Index c = 0; c < test.n_classes; ++c) by_class.push_back(test.indices_of(c));
  std::vector<Index> rows;
  for (Index i = 0; i < n; ++i) {
    const auto& members = by_class[static_cast<std::size_t>(i % test.n_classes)];
    const auto j = static_cast<std::size_t>(i / test.n_classes);
    if (j >= members.size()) throw std::out_of_range("test set too small for " + std::to_string(n) + " samples");
    rows.push_back(members[j]);
  }
  return nn::gather(test.images, rows);
}

Tensor<float> concat_rows(const std::vector<Tensor<float>>& parts) {
  ad::Shape shape = parts.front().shape();
  shape.front() = 0;
  for (const auto& p : parts) shape.front() += p.dim(0);
  Tensor<float> out(shape);
  Index offset = 0;
  for (const auto& p : parts) {
    std::copy_n(p.ptr(), p.size(), out.ptr() + offset);
    offset += p.size();
  }
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << text;
  if (!out) throw std::runtime_error("cannot write " + p.string());
}

}  // namespace

Experiment::Experiment(const ExperimentConfig& config, fs::path output_dir, ExperimentOptions options)
    : cfg_(config.resolved()), hash_(config.hash()), out_(std::move(output_dir)), opt_(options) {
  config.validate();
  if (opt_.reuse_artifacts) check_stamp(out_);
  fs::create_directories(out_);
  write_file(out_ / "config.ini", config.to_text());
  write_stamp(out_);
}

template <typename F>
auto Experiment::stage(const std::string& name, F&& fn) {
  const auto t0 = Clock::now();
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      timings_[name] = std::chrono::duration<double>(Clock::now() - t0).count();
    } else {
      auto result = fn();
      timings_[name] = std::chrono::duration<double>(Clock::now() - t0).count();
      return result;
    }
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    write_file(out_ / "error.txt", "stage: " + name + "\nerror: " + e.what() + "\n");
    log::error("stage " + name + " failed: " + e.what());
    throw StageError(name, e.what());
  }
}

std::optional<io::Checkpoint> Experiment::cached(const fs::path& path) {
  if (!opt_.reuse_artifacts || !fs::exists(path)) return std::nullopt;
  auto ckpt = io::load_checkpoint(path);
  const std::string found = ckpt.has_meta("config_hash") ? ckpt.meta("config_hash") : "(none)";
  if (found != hash_) {
    throw FormatError("artifact " + path.string() + " was produced by config " + found + ", current config is " +
                      hash_);
  }
  log::info("reusing " + path.string());
  return ckpt;
}

void Experiment::save(io::Checkpoint ckpt, const fs::path& path) {
  ckpt.metadata["config_hash"] = hash_;
  fs::create_directories(path.parent_path());
  io::save_checkpoint(ckpt, path);
}

void Experiment::check_stamp(const fs::path& dir) {
  const auto stamp = dir / "config_hash.txt";
  if (!fs::exists(stamp)) return;
  const std::string found = read_file(stamp);
  if (found != hash_ + "\n") {
    throw FormatError("directory " + dir.string() + " holds artifacts of config " + found.substr(0, 16) +
                      ", current config is " + hash_);
  }
}

void Experiment::write_stamp(const fs::path& dir) { write_file(dir / "config_hash.txt", hash_ + "\n"); }

std::vector<eval::ClassInfo> Experiment::class_infos() {
  const auto& d = dataset();
  std::vector<eval::ClassInfo> out;
  for (Index c = 0; c < static_cast<Index>(d.class_names.size()); ++c) out.push_back({c, d.class_names[c]});
  return out;
}

const ToyDataset& Experiment::dataset() {
  if (data_) return *data_;
  return *(data_ = stage("dataset", [&] {
    const fs::path dir = out_ / "data";
    if (opt_.reuse_artifacts) check_stamp(dir);
    auto d = synth_dataset(cfg_.dataset);
    if (opt_.write_images && !(opt_.reuse_artifacts && fs::exists(dir / "manifest.tsv"))) {
      write_dataset(d, dir);
      write_stamp(dir);
    }
    return d;
  }));
}

const std::vector<corpus::ClassCount>& Experiment::class_frequencies() {
  if (counts_) return *counts_;
  const auto& names = dataset().class_names;
  stage("corpus", [&] {
    const fs::path dir = out_ / "corpus";
    if (opt_.reuse_artifacts) check_stamp(dir);
    fs::create_directories(dir);
    const auto captions = dir / "captions.txt", synonyms = dir / "synonyms.tsv";
    write_caption_corpus(cfg_.dataset, captions, cfg_.corpus.filler_captions);
    write_synonyms(cfg_.dataset, synonyms);
    corpus::CountOptions copt;
    copt.threads = cfg_.corpus.threads > 0 ? cfg_.corpus.threads
                                           : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    copt.n_max = cfg_.corpus.n_max;
    corpus::FrequencyTable table;
    auto counts = corpus::class_counts_from_file(captions, names, corpus::SynonymMap::load(synonyms), copt, &table);
    auto ranked = corpus::rank_and_split(counts, cfg_.eval.split_hi, cfg_.eval.split_lo);
    std::ofstream ng(dir / "ngrams.tsv");
    table.write_tsv(ng);
    std::ofstream cc(dir / "class_counts.tsv");
    corpus::write_class_counts(cc, counts);
    std::ofstream sp(dir / "splits.tsv");
    corpus::write_splits(sp, ranked);
    write_stamp(dir);
    counts_ = std::move(counts);
    splits_ = std::move(ranked);
  });
  return *counts_;
}

const std::vector<corpus::RankedClass>& Experiment::class_splits() {
  class_frequencies();
  return *splits_;
}

const diffusion::Autoencoder<float>& Experiment::autoencoder() {
  if (ae_) return *ae_;
  const auto& d = dataset();
  ae_ = stage("train_autoencoder", [&] {
    const auto path = out_ / "models" / "autoencoder.ckpt";
    if (auto ck = cached(path)) return diffusion::Autoencoder<float>::from_checkpoint(*ck);
    diffusion::Autoencoder<float> m(cfg_.autoencoder, Rng::mix(cfg_.seed, stream::kModelInit));
    diffusion::train_autoencoder(m, d.train, cfg_.autoencoder_train);
    save(m.to_checkpoint(), path);
    return m;
  });
  const Tensor<float> recon = diffusion::decode_all(*ae_, diffusion::encode_all(*ae_, d.test.images));
  stats_["autoencoder_test_mse"] = static_cast<double>((recon.data() - d.test.images.data()).square().mean());
  return *ae_;
}

const diffusion::Denoiser<float>& Experiment::denoiser() {
  if (dn_) return *dn_;
  const auto& d = dataset();
  const auto& ae = autoencoder();
  dn_ = stage("train_denoiser", [&] {
    const auto path = out_ / "models" / "denoiser.ckpt";
    if (auto ck = cached(path)) return diffusion::Denoiser<float>::from_checkpoint(*ck);
    diffusion::Denoiser<float> m(cfg_.denoiser, Rng::mix(cfg_.seed, stream::kModelInit + 100));
    const Tensor<float> z = diffusion::encode_all(ae, d.train.images);
    diffusion::train_denoiser(m, z, d.train.labels, cfg_.denoiser_train);
    save(m.to_checkpoint(), path);
    return m;
  });
  return *dn_;
}

const models::Embedder<float>& Experiment::embedder() {
  if (emb_) return *emb_;
  const auto& d = dataset();
  emb_ = stage("train_embedder", [&] {
    const auto path = out_ / "models" / "embedder.ckpt";
    if (auto ck = cached(path)) return models::Embedder<float>::from_checkpoint(*ck);
    models::Embedder<float> m(cfg_.embedder, Rng::mix(cfg_.seed, stream::kModelInit + 200));
    models::train_embedder(m, d.train, cfg_.embedder_train);
    save(m.to_checkpoint(), path);
    return m;
  });
  stats_["embedder_probe_accuracy"] =
      models::linear_probe_accuracy(*emb_, d.train, d.test, 200, Rng::mix(cfg_.seed, stream::kMetrics));
  return *emb_;
}

const models::Classifier<float>& Experiment::classifier() {
  if (clf_) return *clf_;
  const auto& d = dataset();
  clf_ = stage("train_classifier", [&] {
    const auto path = out_ / "models" / "classifier.ckpt";
    if (auto ck = cached(path)) return models::Classifier<float>::from_checkpoint(*ck);
    models::Classifier<float> m(cfg_.classifier, Rng::mix(cfg_.seed, stream::kModelInit + 300));
    models::train_classifier(m, d.train, cfg_.classifier_train);
    save(m.to_checkpoint(), path);
    return m;
  });
  const auto acc = models::per_class_accuracy(*clf_, d.test);
  stats_["classifier_test_balanced_accuracy"] = models::balanced_accuracy(acc);
  for (std::size_t c = 0; c < acc.size(); ++c) stats_["classifier_test_accuracy_" + std::to_string(c)] = acc[c];
  return *clf_;
}

seed::ModelStack<float> Experiment::model_stack() {
  autoencoder();
  denoiser();
  embedder();
  return {&*ae_, &*dn_, &*emb_};
}

const std::vector<seed::ReferenceSet<float>>& Experiment::references() {
  if (refs_) return *refs_;
  const auto& d = dataset();
  const auto st = model_stack();
  refs_ = stage("references", [&] {
    std::vector<seed::ReferenceSet<float>> out;
    for (Index c = 0; c < d.train.n_classes; ++c) {
      auto members = d.train.indices_of(c);
      members.resize(static_cast<std::size_t>(cfg_.eval.references));
      out.emplace_back(nn::gather(d.train.images, members), c, st);
    }
    return out;
  });
  return *refs_;
}

const GeneratedPool& Experiment::load_or_make_pool(std::optional<GeneratedPool>& slot, const std::string& name,
                                                   const std::function<GeneratedPool()>& make) {
  const auto path = out_ / "generated" / (name + ".ckpt");
  const Index n_classes = cfg_.dataset.n_classes;
  slot = stage(name + "_pool", [&] {
    GeneratedPool pool;
    if (auto ck = cached(path)) {
      pool.per_class = io::meta_long(ck->metadata, "pool.per_class");
      pool.images.images = ck->tensors_as<float>().at("images");
      pool.images.n_classes = n_classes;
    } else {
      pool = make();
      io::Checkpoint fresh;
      fresh.metadata["model"] = "pool";
      io::put_meta(fresh.metadata, "pool.per_class", pool.per_class);
      fresh.tensors.emplace_back("images", pool.images.images);
      save(fresh, path);
    }
    pool.images.labels.clear();
    for (Index c = 0; c < n_classes; ++c) pool.images.labels.insert(pool.images.labels.end(), pool.per_class, c);
    if (opt_.write_images) io::write_ppm(out_ / "generated" / (name + "_grid.ppm"), sample_grid(pool, 8));
    return pool;
  });
  return *slot;
}

const GeneratedPool& Experiment::baseline_pool() {
  if (baseline_pool_) return *baseline_pool_;
  const auto st = model_stack();
  return load_or_make_pool(baseline_pool_, "baseline", [&] {
    const Index n = cfg_.eval.pool_per_class, n_classes = cfg_.dataset.n_classes;
    std::vector<Tensor<float>> per_class;
    for (Index c = 0; c < n_classes; ++c) {
      Rng rng(Rng::mix(Rng::mix(cfg_.seed, stream::kBaselinePool), static_cast<std::uint64_t>(c)));
      const Tensor<float> seeds = diffusion::random_seed<float>(st.denoiser->config(), n, rng);
      const Tensor<float> z = seed::generate_latents(*st.denoiser, seeds, std::vector<Index>(n, c),
                                                     cfg_.seedselect.sampler());
      per_class.push_back(diffusion::decode_all(*st.autoencoder, z));
    }
    GeneratedPool pool;
    pool.per_class = n;
    pool.images.images = concat_rows(per_class);
    pool.images.n_classes = n_classes;
    return pool;
  });
}

const GeneratedPool& Experiment::seedselect_pool() {
  if (seedselect_pool_) return *seedselect_pool_;
  const auto st = model_stack();
  const auto& refs = references();
  return load_or_make_pool(seedselect_pool_, "seedselect", [&] {
    const Index n = cfg_.eval.pool_per_class, n_classes = cfg_.dataset.n_classes;
    const Index groups = cfg_.eval.pool_groups, per_group = n / groups;
    models::CentroidTable<float> table;
    for (const auto& r : refs) table[r.target_class()] = r.centroid();
    std::vector<Tensor<float>> per_class;
    double subset_its = 0.0;
    for (Index c = 0; c < n_classes; ++c) {
      std::vector<Tensor<float>> parts;
      for (Index g = 0; g < groups; ++g) {
        Rng rng(Rng::mix(Rng::mix(cfg_.seed, stream::kSeedSelectPool), static_cast<std::uint64_t>(c * groups + g)));
        auto res = seed::bootstrap_generate(st, refs[static_cast<std::size_t>(c)], per_group, cfg_.bootstrap,
                                            cfg_.seedselect, rng, std::optional<Tensor<float>>{},
                                            cfg_.seedselect.contrastive ? &table : nullptr);
        subset_its += res.mean_subset_iterations() * static_cast<double>(per_group);
        parts.push_back(std::move(res.images));
      }
      per_class.push_back(concat_rows(parts));
      log::info("seedselect pool: class " + std::to_string(c) + " done");
    }
    log::info("seedselect pool: mean subset iterations " +
              std::to_string(subset_its / static_cast<double>(n * n_classes)));
    GeneratedPool pool;
    pool.per_class = n;
    pool.images.images = concat_rows(per_class);
    pool.images.n_classes = n_classes;
    return pool;
  });
}

eval::FaithfulnessCurve Experiment::baseline_curve() {
  const auto& pool = baseline_pool();
  const auto& clf = classifier();
  const auto& freq = class_frequencies();
  const auto classes = class_infos();
  return stage("baseline_faithfulness", [&] {
    return eval::faithfulness_curve([&](Index c, Index n) { return pool.class_images(c, n); }, clf, classes,
                                    cfg_.eval.faithfulness_per_class, freq,
                                    {cfg_.eval.split_hi, cfg_.eval.split_lo});
  });
}

eval::FaithfulnessCurve Experiment::seedselect_curve() {
  const auto& pool = seedselect_pool();
  const auto& clf = classifier();
  const auto& freq = class_frequencies();
  const auto classes = class_infos();
  return stage("seedselect_faithfulness", [&] {
    return eval::faithfulness_curve([&](Index c, Index n) { return pool.class_images(c, n); }, clf, classes,
                                    cfg_.eval.faithfulness_per_class, freq,
                                    {cfg_.eval.split_hi, cfg_.eval.split_lo});
  });
}

void Experiment::distribution_metrics(eval::EvalReport& r) {
  const auto& d = dataset();
  const auto& emb = embedder();
  const auto& base = baseline_pool();
  const auto& sel = seedselect_pool();
  stage("distribution_metrics", [&] {
    const Index n = cfg_.eval.distribution_samples;
    auto features = [&](const Tensor<float>& images) { return eval::to_features(models::embed_all(emb, images)); };
    const eval::Features real = features(interleave_test(d.test, n));
    const eval::Features fb = features(base.interleaved(n));
    const eval::Features fs_ = features(sel.interleaved(n));
    const std::uint64_t seed = Rng::mix(cfg_.seed, stream::kMetrics);

    r.knn_radius_curve = eval::knn_radius_curve(real, cfg_.eval.prdc_k_max);
    r.prdc_k = cfg_.eval.prdc_k;
    if (r.prdc_k == 0) {
      std::vector<double> decreasing;
      for (double g : r.knn_radius_curve) decreasing.push_back(r.knn_radius_curve.back() - g);
      r.prdc_k = eval::elbow(decreasing);
    }
    r.ndb_bins = cfg_.eval.ndb_bins;
    if (r.ndb_bins == 0) {
      r.inertia_curve = eval::inertia_curve(real, cfg_.eval.ndb_k_max, seed);
      r.ndb_bins = eval::elbow(r.inertia_curve);
    }
    auto arm = [&](const eval::Features& gen) {
      eval::ArmMetrics a;
      a.samples = gen.rows();
      a.fid = eval::fid(real, gen);
      a.prdc = eval::prdc(real, gen, r.prdc_k);
      const auto nd = eval::ndb(real, gen, r.ndb_bins, cfg_.eval.ndb_alpha, seed);
      a.ndb = nd.count;
      a.ndb_bins = nd.bins;
      return a;
    };
    r.baseline_metrics = arm(fb);
    r.seedselect_metrics = arm(fs_);
  });
}

eval::BootstrapSummary Experiment::bootstrap_timing() {
  const auto st = model_stack();
  const auto& refs = references();
  return stage("bootstrap_timing", [&] {
    eval::BootstrapSummary s;
    const Index m = cfg_.eval.timing_images_per_class;
    // Same stopping rule on both sides: the per-image subset runs get the
    // full iteration budget instead of the short production budget.
    seed::BootstrapPlan plan = cfg_.bootstrap;
    plan.subset_iters = cfg_.seedselect.max_iters;
    double warm_total = 0.0, warm_start = 0.0;
    for (const auto& r : refs) {
      const auto c = static_cast<std::uint64_t>(r.target_class());
      Rng cold_rng(Rng::mix(Rng::mix(cfg_.seed, stream::kTiming), 2 * c));
      std::vector<Tensor<float>> inits;
      for (Index i = 0; i < m; ++i) inits.push_back(diffusion::random_seed<float>(st.denoiser->config(), 1, cold_rng));
      seed::ObjectiveTargets<float> targets{std::vector<const seed::ReferenceSet<float>*>(m, &r), nullptr};
      const auto cold = seed::optimize_batch(seed::seedselect_objective(st, targets, cfg_.seedselect), inits,
                                             cfg_.seedselect, cfg_.seedselect.max_iters);
      for (const auto& o : cold) s.cold_iterations.push_back(o.iterations);

      Rng warm_rng(Rng::mix(Rng::mix(cfg_.seed, stream::kTiming), 2 * c + 1));
      const auto warm = seed::bootstrap_generate(st, r, m, plan, cfg_.seedselect, warm_rng);
      for (const auto& o : warm.subsets) {
        s.warm_iterations.push_back(o.iterations);
        warm_total += o.iterations;
      }
      warm_start += warm.warm.iterations;
    }
    s.images = static_cast<Index>(s.cold_iterations.size());
    double cold_total = 0.0;
    for (int i : s.cold_iterations) cold_total += i;
    s.cold_mean_iterations = cold_total / static_cast<double>(s.images);
    s.warm_mean_iterations = warm_total / static_cast<double>(s.warm_iterations.size());
    s.warm_start_iterations = warm_start / static_cast<double>(refs.size());
    s.warm_amortized_iterations = (warm_total + warm_start) / static_cast<double>(s.warm_iterations.size());
    return s;
  });
}

std::vector<eval::LambdaPoint> Experiment::lambda_sweep() {
  const auto st = model_stack();
  const auto& refs = references();
  return stage("lambda_sweep", [&] {
    std::vector<eval::LambdaPoint> out;
    for (double lambda : cfg_.eval.lambdas) {
      seed::OptimizationConfig oc = cfg_.seedselect;
      oc.lambda = lambda;
      eval::LambdaPoint p;
      p.lambda = lambda;
      for (Index cls : cfg_.eval.lambda_classes) {
        // Common initial seeds across lambda values.
        Rng rng(Rng::mix(Rng::mix(cfg_.seed, stream::kLambda), static_cast<std::uint64_t>(cls)));
        std::vector<Tensor<float>> inits;
        for (Index s = 0; s < cfg_.eval.lambda_seeds; ++s) {
          inits.push_back(diffusion::random_seed<float>(st.denoiser->config(), 1, rng));
        }
        const auto& r = refs[static_cast<std::size_t>(cls)];
        seed::ObjectiveTargets<float> targets{std::vector<const seed::ReferenceSet<float>*>(inits.size(), &r), nullptr};
        const auto res =
            seed::optimize_batch(seed::seedselect_objective(st, targets, oc), inits, oc, cfg_.eval.lambda_iters);
        for (const auto& o : res) {
          const auto& h = o.history[static_cast<std::size_t>(o.best_iteration)];
          p.semantic += h.semantic;
          p.appearance += h.appearance;
          p.total += h.total;
          ++p.seeds;
        }
      }
      p.semantic /= static_cast<double>(p.seeds);
      p.appearance /= static_cast<double>(p.seeds);
      p.total /= static_cast<double>(p.seeds);
      out.push_back(p);
    }
    return out;
  });
}

eval::AugmentationSummary Experiment::augmentation() {
  const auto& d = dataset();
  const auto& base = baseline_pool();
  const auto& sel = seedselect_pool();
  return stage("augmentation", [&] {
    eval::AugmentationSummary s;
    s.shots = cfg_.eval.augment_shots;
    s.generated_per_class = cfg_.eval.augment_per_class;
    // The few-shot images are the first references of each class.
    const auto real = eval::few_shot_subset(d.train, s.shots);
    eval::MixConfig mix;
    mix.model = cfg_.classifier;
    mix.train = cfg_.classifier_train;
    mix.train.epochs = cfg_.eval.augment_epochs;
    mix.train.seed = Rng::mix(cfg_.seed, stream::kAugment);
    mix.init_seed = Rng::mix(cfg_.seed, stream::kAugment + 1);
    const auto r0 = eval::augmentation_eval(real, nullptr, d.test, mix);
    const auto gen_sel = sel.head(s.generated_per_class);
    const auto r1 = eval::augmentation_eval(real, &gen_sel, d.test, mix);
    const auto gen_base = base.head(s.generated_per_class);
    const auto r2 = eval::augmentation_eval(real, &gen_base, d.test, mix);
    s.real_only = r0.balanced_accuracy;
    s.seedselect_mix = r1.balanced_accuracy;
    s.random_mix = r2.balanced_accuracy;
    s.real_only_per_class = r0.per_class;
    s.seedselect_per_class = r1.per_class;
    s.random_per_class = r2.per_class;
    return s;
  });
}

std::map<std::string, std::string> Experiment::artifact_hashes() {
  char buf[17];
  auto hex = [&](std::uint64_t v) {
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
    return std::string(buf);
  };
  std::map<std::string, std::string> out;
  if (ae_) out["autoencoder"] = hex(ae_->params().hash());
  if (dn_) out["denoiser"] = hex(dn_->params().hash());
  if (emb_) out["embedder"] = hex(emb_->params().hash());
  if (clf_) out["classifier"] = hex(clf_->params().hash());
  return out;
}

eval::EvalReport Experiment::run_all() {
  eval::EvalReport r;
  r.config_hash = hash_;
  class_frequencies();
  classifier();
  r.baseline = baseline_curve();
  r.seedselect = seedselect_curve();
  distribution_metrics(r);
  r.bootstrap = bootstrap_timing();
  r.lambda_sweep = lambda_sweep();
  r.augmentation = augmentation();
  r.artifact_hashes = artifact_hashes();
  r.model_stats = stats_;
  r.timings = timings_;

  write_file(out_ / "report.json", r.to_json(false));
  nlohmann::json t = nlohmann::json::object();
  for (const auto& [k, v] : timings_) t[k] = v;
  write_file(out_ / "timings.json", t.dump(2) + "\n");
  std::ofstream b(out_ / "baseline_curve.tsv");
  eval::write_curve_tsv(b, r.baseline);
  std::ofstream s(out_ / "seedselect_curve.tsv");
  eval::write_curve_tsv(s, r.seedselect);
  std::ofstream l(out_ / "lambda_sweep.tsv");
  l << "lambda\tsemantic\tappearance\ttotal\tseeds\n";
  for (const auto& p : r.lambda_sweep) {
    l << io::format_double(p.lambda) << '\t' << io::format_double(p.semantic) << '\t'
      << io::format_double(p.appearance) << '\t' << io::format_double(p.total) << '\t' << p.seeds << '\n';
  }
  return r;
}

eval::EvalReport run_experiment(const ExperimentConfig& config, ExperimentOptions options) {
  Experiment e(config, config.output_dir, options);
  return e.run_all();
}

Tensor<float> sample_grid(const GeneratedPool& pool, Index cols) {
  const auto& imgs = pool.images.images;
  const Index rows = pool.images.n_classes, ch = imgs.dim(1), s = imgs.dim(2);
  cols = std::min(cols, pool.per_class);
  Tensor<float> grid({1, ch, rows * s, cols * s});
  for (Index r = 0; r < rows; ++r) {
    for (Index c = 0; c < cols; ++c) {
      const float* src = imgs.ptr() + (r * pool.per_class + c) * ch * s * s;
      for (Index k = 0; k < ch; ++k) {
        for (Index y = 0; y < s; ++y) {
          std::copy_n(src + (k * s + y) * s, s, grid.ptr() + (k * rows * s + r * s + y) * cols * s + c * s);
        }
      }
    }
  }
  return grid;
}

}  // namespace seedselect::pipeline
