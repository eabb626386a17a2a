#pragma once

#include <optional>
#include <string>
#include <vector>

namespace seedselect::seed {

enum class StopReason { Plateau, IncreaseLimit, MaxIters, NonFinite };

std::string to_string(StopReason r);

/// Stopping rule applied to the sequence of per-iteration total losses:
/// stop when the loss has increased on more than `patience` consecutive
/// iterations, when the best loss improved by a relative amount below
/// `plateau_tol` over the last `plateau_window` iterations, or when
/// max_iters losses have been seen.
class StopRule {
 public:
  StopRule(int max_iters, int patience = 3, int plateau_window = 10, double plateau_tol = 1e-4);

  /// Feed the loss of the current iteration; returns a reason to stop now.
  std::optional<StopReason> update(double loss);

  int seen() const { return static_cast<int>(best_history_.size()); }
  double best() const { return best_; }
  int best_index() const { return best_index_; }

 private:
  int max_iters_, patience_, window_;
  double tol_;
  double last_ = 0.0, best_ = 0.0;
  int best_index_ = -1, increases_ = 0;
  std::vector<double> best_history_;
};

}  // namespace seedselect::seed
