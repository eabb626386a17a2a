#pragma once

#include <cstdint>
#include <vector>

#include "seedselect/eval/features.hpp"

namespace seedselect::eval {

struct NdbResult {
  int count = 0;            // significantly different bins
  Eigen::Index bins = 0;    // bins after merging empty ones
  int merged = 0;           // empty real bins merged away
  std::vector<double> real_proportion, gen_proportion, z;
  std::vector<bool> significant;
};

/// Two-sided critical value z with P(|Z| > z) = alpha.
double normal_critical_value(double alpha);

/// Number of statistically different bins: k-means on the real features,
/// both sets assigned to the nearest centroid, and a pooled two-proportion
/// z-test per bin at level alpha (no multiplicity correction).
NdbResult ndb(const Features& real, const Features& generated, Eigen::Index n_bins, double alpha = 0.05,
              std::uint64_t seed = 0);

}  // namespace seedselect::eval
