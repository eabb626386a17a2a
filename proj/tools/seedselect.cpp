#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <thread>

#include "CLI11.hpp"
#include "seedselect/core/log.hpp"
#include "seedselect/corpus/classes.hpp"
#include "seedselect/io/image.hpp"
#include "seedselect/nn/layers.hpp"
#include "seedselect/pipeline/experiment.hpp"

namespace fs = std::filesystem;
using namespace seedselect;
using ad::Index;
using ad::Tensor;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> overrides;
  std::string out;
  std::optional<std::uint64_t> seed;
  bool fresh = false;
  bool no_images = false;
  bool quiet = false;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("-c,--config", c.config, "Experiment config file (key = value with [sections])");
  cmd->add_option("--set", c.overrides, "Override a config key, e.g. --set seedselect.lambda=0.5");
  cmd->add_option("-o,--out", c.out, "Output root (default: $SEEDSELECT_OUT, then experiment.output_dir)");
  cmd->add_option("--seed", c.seed, "Global random seed");
  cmd->add_flag("--fresh", c.fresh, "Recompute every stage instead of reusing artifacts");
  cmd->add_flag("--no-images", c.no_images, "Skip writing image files");
  cmd->add_flag("-q,--quiet", c.quiet, "Only print warnings and errors");
}

pipeline::ExperimentConfig load_config(const Common& c) {
  pipeline::ConfigFile file = c.config.empty() ? pipeline::ConfigFile{} : pipeline::ConfigFile::load(c.config);
  for (const auto& o : c.overrides) file.set(o);
  auto cfg = pipeline::ExperimentConfig::from_file(file);
  if (c.seed) cfg.seed = *c.seed;
  if (!c.out.empty()) {
    cfg.output_dir = c.out;
  } else if (const char* env = std::getenv("SEEDSELECT_OUT")) {
    cfg.output_dir = env;
  }
  return cfg;
}

std::unique_ptr<pipeline::Experiment> open(const Common& c) {
  if (c.quiet) log::set_level(log::Level::Warn);
  const auto cfg = load_config(c);
  pipeline::ExperimentOptions opt;
  opt.reuse_artifacts = !c.fresh;
  opt.write_images = !c.no_images;
  return std::make_unique<pipeline::Experiment>(cfg, cfg.output_dir, opt);
}

void print_curve(const std::string& title, const eval::FaithfulnessCurve& c) {
  std::cout << title << "\n";
  eval::write_curve_tsv(std::cout, c);
  std::cout << "top-quartile mean " << c.top_quartile_mean << ", tail-quartile mean " << c.tail_quartile_mean
            << ", spearman " << c.spearman << "\n";
  std::cout << "split means: many " << c.many_mean << ", med " << c.med_mean << ", few " << c.few_mean << "\n";
}

void print_arm(const std::string& name, const eval::ArmMetrics& a) {
  std::cout << name << ": fid " << a.fid << ", precision " << a.prdc.precision << ", recall " << a.prdc.recall
            << ", fidelity " << a.prdc.density << ", diversity " << a.prdc.coverage << ", ndb " << a.ndb << "/"
            << a.ndb_bins << "\n";
}

void write_images(const Tensor<float>& images, const fs::path& dir, const std::string& prefix) {
  fs::create_directories(dir);
  for (Index i = 0; i < images.dim(0); ++i) {
    char name[64];
    std::snprintf(name, sizeof(name), "%s%04ld.ppm", prefix.c_str(), static_cast<long>(i));
    io::write_ppm(dir / name, nn::gather(images, {i}));
  }
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Seed optimization for long-tail concepts on a toy latent diffusion model"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth-data", "Render the long-tailed toy dataset and its caption corpus");
  auto* train_ae = app.add_subcommand("train-ae", "Train the autoencoder");
  auto* train_ddpm = app.add_subcommand("train-ddpm", "Train the latent denoiser");
  auto* train_emb = app.add_subcommand("train-embedder", "Train the semantic embedder");
  auto* train_clf = app.add_subcommand("train-classifier", "Train the balanced evaluation classifier");
  auto* seedsel = app.add_subcommand("seedselect", "Optimize seeds for one class and write the images");
  auto* generate = app.add_subcommand("generate", "Random-seed generation for one class");
  auto* eval_faith = app.add_subcommand("eval-faithfulness", "Per-class faithfulness of both arms");
  auto* eval_fid = app.add_subcommand("eval-fid", "FID of both arms");
  auto* eval_div = app.add_subcommand("eval-diversity", "PRDC and NDB of both arms");
  auto* eval_aug = app.add_subcommand("eval-augment", "Few-shot mix-training evaluation");
  auto* corpus_count = app.add_subcommand("corpus-count", "Unigram/bigram counts of a caption file");
  auto* corpus_classes = app.add_subcommand("corpus-classes", "Class counts and many/med/few splits");
  auto* run_all = app.add_subcommand("run-all", "Every stage and the final report");
  auto* show_config = app.add_subcommand("show-config", "Print the effective config");

  for (auto* cmd : {synth, train_ae, train_ddpm, train_emb, train_clf, seedsel, generate, eval_faith, eval_fid,
                    eval_div, eval_aug, run_all, show_config}) {
    add_common(cmd, common);
  }

  Index cls = 0, n_images = 20;
  std::string trace_path, init_path;
  for (auto* cmd : {seedsel, generate}) {
    cmd->add_option("--class", cls, "Class id")->required();
    cmd->add_option("-n,--images", n_images, "Number of images");
  }
  seedsel->add_option("--trace", trace_path, "Write the warm-start loss trace (TSV)");

  std::string input, output, classes_file, synonyms_file;
  int threads = 0, n_max = 2;
  std::uint64_t hi = 1000000, lo = 10000;
  std::optional<std::uint64_t> corpus_seed;
  for (auto* cmd : {corpus_count, corpus_classes}) {
    cmd->add_option("-i,--input", input, "Caption file, one caption per line")->required();
    cmd->add_option("--threads", threads, "Worker threads (0: hardware concurrency)");
    cmd->add_option("--n-max", n_max, "Longest n-gram counted");
    cmd->add_option("--seed", corpus_seed, "Accepted for uniformity; counting is deterministic");
  }
  corpus_count->add_option("-o,--output", output, "Output TSV (default: stdout)");
  corpus_classes->add_option("--classes", classes_file, "Class names, one per line")->required();
  corpus_classes->add_option("--synonyms", synonyms_file, "Synonym TSV: class<TAB>phrase...");
  corpus_classes->add_option("--hi", hi, "Many split: count > hi");
  corpus_classes->add_option("--lo", lo, "Few split: count < lo");
  corpus_classes->add_option("-o,--output", output, "Directory for class_counts.tsv and splits.tsv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (corpus_count->parsed() || corpus_classes->parsed()) {
      corpus::CountOptions opt;
      opt.threads = threads > 0 ? threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
      opt.n_max = n_max;
      if (corpus_count->parsed()) {
        const auto table = corpus::count_ngrams_file(input, opt);
        if (output.empty()) {
          table.write_tsv(std::cout);
        } else {
          std::ofstream out(output);
          table.write_tsv(out);
        }
        std::cerr << "captions " << table.total_captions << ", tokens " << table.total_tokens << ", distinct "
                  << table.size() << "\n";
        return 0;
      }
      const auto names = read_lines(classes_file);
      const auto synonyms = synonyms_file.empty() ? corpus::SynonymMap{} : corpus::SynonymMap::load(synonyms_file);
      const auto counts = corpus::class_counts_from_file(input, names, synonyms, opt);
      const auto ranked = corpus::rank_and_split(counts, hi, lo);
      if (output.empty()) {
        corpus::write_splits(std::cout, ranked);
      } else {
        fs::create_directories(output);
        std::ofstream c(fs::path(output) / "class_counts.tsv");
        corpus::write_class_counts(c, counts);
        std::ofstream s(fs::path(output) / "splits.tsv");
        corpus::write_splits(s, ranked);
      }
      return 0;
    }

    if (show_config->parsed()) {
      const auto cfg = load_config(common);
      std::cout << cfg.to_text() << "# hash " << cfg.hash() << "\n";
      return 0;
    }

    auto exp = open(common);
    if (synth->parsed()) {
      const auto& d = exp->dataset();
      exp->class_frequencies();
      std::cout << "train " << d.train.size() << ", test " << d.test.size() << " images in "
                << (exp->output_dir() / "data").string() << "\n";
      corpus::write_splits(std::cout, exp->class_splits());
    } else if (train_ae->parsed()) {
      exp->autoencoder();
      std::cout << "autoencoder ready in " << (exp->output_dir() / "models").string() << "\n";
    } else if (train_ddpm->parsed()) {
      exp->denoiser();
      std::cout << "denoiser ready in " << (exp->output_dir() / "models").string() << "\n";
    } else if (train_emb->parsed()) {
      exp->embedder();
      std::cout << "embedder ready in " << (exp->output_dir() / "models").string() << "\n";
    } else if (train_clf->parsed()) {
      const auto& clf = exp->classifier();
      const auto acc = models::per_class_accuracy(clf, exp->dataset().test);
      std::cout << "classifier balanced test accuracy " << models::balanced_accuracy(acc) << "\n";
    } else if (seedsel->parsed()) {
      const auto& cfg = exp->config();
      if (cls < 0 || cls >= cfg.dataset.n_classes) throw std::invalid_argument("class out of range");
      const auto st = exp->model_stack();
      const auto& refs = exp->references()[static_cast<std::size_t>(cls)];
      Rng rng(Rng::mix(cfg.seed, 100 + static_cast<std::uint64_t>(cls)));
      const auto res = seed::bootstrap_generate(st, refs, n_images, cfg.bootstrap, cfg.seedselect, rng);
      const auto dir = exp->output_dir() / "seedselect" / ("class_" + std::to_string(cls));
      write_images(res.images, dir, "img_");
      if (!trace_path.empty()) {
        std::ofstream t(trace_path);
        seed::write_trace(t, res.warm);
      }
      std::cout << "warm start: " << res.warm.iterations << " iterations (" << seed::to_string(res.warm.stop_reason)
                << "), best loss " << res.warm.best_loss << "\n"
                << "subsets: mean " << res.mean_subset_iterations() << " iterations, " << res.subset_seconds
                << " s\nimages in " << dir.string() << "\n";
    } else if (generate->parsed()) {
      const auto& cfg = exp->config();
      if (cls < 0 || cls >= cfg.dataset.n_classes) throw std::invalid_argument("class out of range");
      const auto st = exp->model_stack();
      Rng rng(Rng::mix(cfg.seed, 200 + static_cast<std::uint64_t>(cls)));
      const auto seeds = diffusion::random_seed<float>(st.denoiser->config(), n_images, rng);
      const auto z = seed::generate_latents(*st.denoiser, seeds, std::vector<Index>(n_images, cls),
                                            cfg.seedselect.sampler());
      const auto dir = exp->output_dir() / "generate" / ("class_" + std::to_string(cls));
      write_images(diffusion::decode_all(*st.autoencoder, z), dir, "img_");
      std::cout << "images in " << dir.string() << "\n";
    } else if (eval_faith->parsed()) {
      const auto b = exp->baseline_curve();
      const auto s = exp->seedselect_curve();
      print_curve("random seeds", b);
      print_curve("seedselect", s);
      std::ofstream bt(exp->output_dir() / "baseline_curve.tsv");
      eval::write_curve_tsv(bt, b);
      std::ofstream stt(exp->output_dir() / "seedselect_curve.tsv");
      eval::write_curve_tsv(stt, s);
    } else if (eval_fid->parsed() || eval_div->parsed()) {
      eval::EvalReport r;
      exp->distribution_metrics(r);
      if (eval_fid->parsed()) {
        std::cout << "fid random seeds " << r.baseline_metrics.fid << ", seedselect " << r.seedselect_metrics.fid
                  << "\n";
      } else {
        std::cout << "prdc k " << r.prdc_k << ", ndb bins " << r.ndb_bins << "\n";
        print_arm("random seeds", r.baseline_metrics);
        print_arm("seedselect", r.seedselect_metrics);
      }
    } else if (eval_aug->parsed()) {
      const auto a = exp->augmentation();
      std::cout << a.shots << "-shot real only " << a.real_only << "\n"
                << "+ " << a.generated_per_class << " seedselect images per class " << a.seedselect_mix << "\n"
                << "+ " << a.generated_per_class << " random-seed images per class " << a.random_mix << "\n";
    } else if (run_all->parsed()) {
      const auto r = exp->run_all();
      print_curve("random seeds", r.baseline);
      print_curve("seedselect", r.seedselect);
      print_arm("random seeds", r.baseline_metrics);
      print_arm("seedselect", r.seedselect_metrics);
      std::cout << "bootstrap: cold " << r.bootstrap.cold_mean_iterations << " vs warm "
                << r.bootstrap.warm_mean_iterations << " iterations per image\n";
      std::cout << "augmentation: real only " << r.augmentation.real_only << ", seedselect mix "
                << r.augmentation.seedselect_mix << ", random mix " << r.augmentation.random_mix << "\n";
      std::cout << "report " << (exp->output_dir() / "report.json").string() << "\n";
    }
  } catch (const pipeline::StageError& e) {
    std::cerr << "error in stage " << e.stage() << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
