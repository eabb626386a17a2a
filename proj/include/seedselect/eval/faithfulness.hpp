#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "seedselect/corpus/classes.hpp"
#include "seedselect/models/classifier.hpp"

namespace seedselect::eval {

using ad::Index;
using ad::Tensor;

struct ClassInfo {
  Index id = 0;
  std::string name;
};

struct ClassFaithfulness {
  Index class_id = 0;
  std::string name;
  std::uint64_t frequency = 0;
  Index generated = 0, correct = 0;
  double accuracy = 0.0;
  corpus::Split split = corpus::Split::Med;
};

struct FaithfulnessCurve {
  std::vector<ClassFaithfulness> classes;  // frequency descending, ties by name
  double many_mean = 0.0, med_mean = 0.0, few_mean = 0.0;  // NaN for an empty split
  Index quartile_size = 0;
  double top_quartile_mean = 0.0, tail_quartile_mean = 0.0;
  double spearman = 0.0;  // frequency vs accuracy

  const ClassFaithfulness& of(Index class_id) const;
  std::vector<double> accuracies_by_id() const;
};

/// n images [n, C, H, W] of one class.
using ImageGenerator = std::function<Tensor<float>(Index class_id, Index n)>;

struct SplitThresholds {
  std::uint64_t hi = 1000000, lo = 10000;
};

/// Generates n_per_class images per class, classifies them and aggregates
/// per-class accuracy against the class frequencies. Throws when a class has
/// no entry among `frequencies`.
FaithfulnessCurve faithfulness_curve(const ImageGenerator& generator, const models::Classifier<float>& classifier,
                                     const std::vector<ClassInfo>& classes, Index n_per_class,
                                     const std::vector<corpus::ClassCount>& frequencies,
                                     SplitThresholds thresholds = {});

/// Aggregation step alone, from per-class (generated, correct) counts.
FaithfulnessCurve aggregate_faithfulness(const std::vector<ClassInfo>& classes, const std::vector<Index>& generated,
                                         const std::vector<Index>& correct,
                                         const std::vector<corpus::ClassCount>& frequencies,
                                         SplitThresholds thresholds = {});

void write_curve_tsv(std::ostream& out, const FaithfulnessCurve& curve);

}  // namespace seedselect::eval
