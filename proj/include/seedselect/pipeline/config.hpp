#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "seedselect/diffusion/autoencoder.hpp"
#include "seedselect/diffusion/denoiser.hpp"
#include "seedselect/models/classifier.hpp"
#include "seedselect/models/embedder.hpp"
#include "seedselect/pipeline/dataset.hpp"
#include "seedselect/seed/bootstrap.hpp"

namespace seedselect::pipeline {

/// Flat "section.key" -> value view of an ini-style text:
///   [section]
///   key = value   # comment
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::filesystem::path& path);

  /// "section.key=value" command-line override.
  void set(const std::string& assignment);
  void set(const std::string& key, const std::string& value) { values_[key] = value; }

  const std::map<std::string, std::string>& values() const { return values_; }

 private:
  std::map<std::string, std::string> values_;
};

struct EvalSettings {
  Index faithfulness_per_class = 100;
  Index references = 5;          // k reference images per class
  Index pool_per_class = 200;    // optimized images generated per class
  Index pool_groups = 10;        // warm starts per class; pool_per_class / pool_groups images each
  Index distribution_samples = 1000;
  Index prdc_k = 0;              // 0: elbow of the k-NN radius curve
  Index prdc_k_max = 20;
  Index ndb_bins = 20;           // 0: elbow of the k-means inertia curve
  Index ndb_k_max = 30;
  double ndb_alpha = 0.05;
  std::uint64_t split_hi = 500;
  std::uint64_t split_lo = 50;
  Index timing_images_per_class = 1;
  std::vector<double> lambdas = {0.0, 0.25, 0.5, 0.75, 0.9, 1.0};
  Index lambda_seeds = 6;
  std::vector<Index> lambda_classes = {8, 11};
  int lambda_iters = 200;
  Index augment_shots = 1;
  Index augment_per_class = 200;
  int augment_epochs = 14;
};

struct CorpusSettings {
  Index filler_captions = 20000;
  int threads = 0;  // 0: hardware concurrency
  int n_max = 2;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  diffusion::AutoencoderConfig autoencoder;
  diffusion::AutoencoderTrainConfig autoencoder_train;
  diffusion::DenoiserConfig denoiser;
  diffusion::DenoiserTrainConfig denoiser_train;
  models::EmbedderConfig embedder;
  models::EmbedderTrainConfig embedder_train;
  models::ClassifierConfig classifier;
  models::ClassifierTrainConfig classifier_train;
  seed::OptimizationConfig seedselect;
  seed::BootstrapPlan bootstrap;
  EvalSettings eval;
  CorpusSettings corpus;
  std::string output_dir = "out";
  std::uint64_t seed = 0;

  /// Every key with its value, sections in a fixed order. Parsing the text
  /// back gives the same config.
  std::string to_text() const;
  static ExperimentConfig from_file(const ConfigFile& file);
  static ExperimentConfig from_text(const std::string& text) { return from_file(ConfigFile::parse(text)); }
  static ExperimentConfig load(const std::filesystem::path& path) { return from_file(ConfigFile::load(path)); }

  /// FNV-1a of to_text() minus the output directory, as 16 hex digits.
  std::string hash() const;

  /// Cross-module consistency (class counts, sizes) and per-module checks.
  void validate() const;

  /// Per-stage seeds derived from the global seed; overwrites the seed
  /// fields of the nested configs.
  ExperimentConfig resolved() const;
};

/// Applies file values on top of `base`; unknown keys are an error.
void apply_config(ExperimentConfig& base, const ConfigFile& file);

std::string hex64(std::uint64_t v);

}  // namespace seedselect::pipeline
