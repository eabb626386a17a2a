#pragma once

#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "seedselect/corpus/classes.hpp"
#include "seedselect/eval/report.hpp"
#include "seedselect/pipeline/config.hpp"
#include "seedselect/seed/bootstrap.hpp"

namespace seedselect::pipeline {

using ad::Tensor;

/// Failure inside one pipeline stage.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

struct ExperimentOptions {
  /// Load artifacts already in the output directory instead of recomputing
  /// them; an artifact stamped with another config hash is an error.
  bool reuse_artifacts = true;
  /// Write dataset image files and sample grids.
  bool write_images = true;
};

/// Generated images, `per_class` contiguous rows per class.
struct GeneratedPool {
  nn::LabeledImages images;
  Index per_class = 0;

  /// First n images of one class.
  Tensor<float> class_images(Index cls, Index n) const;
  /// First n images of every class as a labeled set.
  nn::LabeledImages head(Index n) const;
  /// n images taken round-robin over classes.
  Tensor<float> interleaved(Index n) const;
};

/// One experiment over an output directory. Each accessor runs its stage on
/// first use (prerequisites first), reusing on-disk artifacts when allowed.
class Experiment {
 public:
  Experiment(const ExperimentConfig& config, std::filesystem::path output_dir, ExperimentOptions options = {});
  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const ExperimentConfig& config() const { return cfg_; }
  const std::string& config_hash() const { return hash_; }
  const std::filesystem::path& output_dir() const { return out_; }

  const ToyDataset& dataset();
  const std::vector<corpus::ClassCount>& class_frequencies();
  const std::vector<corpus::RankedClass>& class_splits();
  const diffusion::Autoencoder<float>& autoencoder();
  const diffusion::Denoiser<float>& denoiser();
  const models::Embedder<float>& embedder();
  const models::Classifier<float>& classifier();
  seed::ModelStack<float> model_stack();
  const std::vector<seed::ReferenceSet<float>>& references();
  const GeneratedPool& baseline_pool();
  const GeneratedPool& seedselect_pool();

  eval::FaithfulnessCurve baseline_curve();
  eval::FaithfulnessCurve seedselect_curve();
  /// FID, PRDC and NDB of both arms plus the selected hyperparameters.
  void distribution_metrics(eval::EvalReport& report);
  eval::BootstrapSummary bootstrap_timing();
  std::vector<eval::LambdaPoint> lambda_sweep();
  eval::AugmentationSummary augmentation();

  /// Every stage, then report.json (timings excluded), timings.json and
  /// the curve tables.
  eval::EvalReport run_all();

  const std::map<std::string, double>& timings() const { return timings_; }
  std::vector<eval::ClassInfo> class_infos();

 private:
  template <typename F>
  auto stage(const std::string& name, F&& fn);
  std::optional<io::Checkpoint> cached(const std::filesystem::path& path);
  void save(io::Checkpoint ckpt, const std::filesystem::path& path);
  void check_stamp(const std::filesystem::path& dir);
  void write_stamp(const std::filesystem::path& dir);
  const GeneratedPool& load_or_make_pool(std::optional<GeneratedPool>& slot, const std::string& name,
                                         const std::function<GeneratedPool()>& make);
  std::map<std::string, std::string> artifact_hashes();

  ExperimentConfig cfg_;
  std::string hash_;
  std::filesystem::path out_;
  ExperimentOptions opt_;
  std::map<std::string, double> timings_;
  std::map<std::string, double> stats_;

  std::optional<ToyDataset> data_;
  std::optional<std::vector<corpus::ClassCount>> counts_;
  std::optional<std::vector<corpus::RankedClass>> splits_;
  std::optional<diffusion::Autoencoder<float>> ae_;
  std::optional<diffusion::Denoiser<float>> dn_;
  std::optional<models::Embedder<float>> emb_;
  std::optional<models::Classifier<float>> clf_;
  std::optional<std::vector<seed::ReferenceSet<float>>> refs_;
  std::optional<GeneratedPool> baseline_pool_, seedselect_pool_;
};

/// Runs every stage in config.output_dir.
eval::EvalReport run_experiment(const ExperimentConfig& config, ExperimentOptions options = {});

/// Grid image [1, 3, rows * S, cols * S] of the first `cols` images per class.
Tensor<float> sample_grid(const GeneratedPool& pool, Index cols);

}  // namespace seedselect::pipeline
