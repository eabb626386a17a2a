#pragma once

#include <map>
#include <string>
#include <vector>

#include "seedselect/eval/faithfulness.hpp"
#include "seedselect/eval/prdc.hpp"

namespace seedselect::eval {

/// Distribution metrics of one generated image set against the real test set.
struct ArmMetrics {
  Index samples = 0;
  double fid = 0.0;
  PrdcResult prdc;
  int ndb = 0;
  Index ndb_bins = 0;
};

struct BootstrapSummary {
  Index images = 0;
  double cold_mean_iterations = 0.0;
  double warm_mean_iterations = 0.0;       // per bootstrap subset
  double warm_amortized_iterations = 0.0;  // including the shared warm start
  double warm_start_iterations = 0.0;
  std::vector<int> cold_iterations, warm_iterations;
};

struct LambdaPoint {
  double lambda = 0.0;
  double semantic = 0.0, appearance = 0.0, total = 0.0;
  Index seeds = 0;
};

struct AugmentationSummary {
  Index shots = 0, generated_per_class = 0;
  double real_only = 0.0, seedselect_mix = 0.0, random_mix = 0.0;
  std::vector<double> real_only_per_class, seedselect_per_class, random_per_class;
};

struct EvalReport {
  std::string config_hash;
  std::map<std::string, std::string> artifact_hashes;
  std::map<std::string, double> model_stats;
  FaithfulnessCurve baseline, seedselect;
  Index prdc_k = 0, ndb_bins = 0;
  std::vector<double> knn_radius_curve, inertia_curve;
  ArmMetrics baseline_metrics, seedselect_metrics;
  BootstrapSummary bootstrap;
  std::vector<LambdaPoint> lambda_sweep;
  AugmentationSummary augmentation;
  std::map<std::string, double> timings;  // stage -> seconds

  /// Pretty JSON with sorted keys. Timings are left out unless requested so
  /// the report bytes depend on the config alone.
  std::string to_json(bool include_timings = false) const;
  static EvalReport from_json(const std::string& text);
};

}  // namespace seedselect::eval
