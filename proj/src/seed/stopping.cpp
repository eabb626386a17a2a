#include "seedselect/seed/stopping.hpp"

#include <cmath>
#include <stdexcept>

namespace seedselect::seed {

std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Plateau: return "plateau";
    case StopReason::IncreaseLimit: return "increase-limit";
    case StopReason::MaxIters: return "max-iters";
    case StopReason::NonFinite: return "non-finite";
  }
  return "unknown";
}

StopRule::StopRule(int max_iters, int patience, int plateau_window, double plateau_tol)
    : max_iters_(max_iters), patience_(patience), window_(plateau_window), tol_(plateau_tol) {
  if (max_iters < 0) throw std::invalid_argument("max_iters must be >= 0");
  if (patience < 1) throw std::invalid_argument("patience must be >= 1");
  if (plateau_window < 1) throw std::invalid_argument("plateau window must be >= 1");
}

std::optional<StopReason> StopRule::update(double loss) {
  if (!std::isfinite(loss)) return StopReason::NonFinite;
  const int i = seen();
  if (i == 0 || loss < best_) {
    best_ = loss;
    best_index_ = i;
  }
  if (i > 0) increases_ = loss > last_ ? increases_ + 1 : 0;
  last_ = loss;
  best_history_.push_back(best_);
  if (increases_ > patience_) return StopReason::IncreaseLimit;
  if (i >= window_) {
    const double before = best_history_[static_cast<std::size_t>(i - window_)];
    const double gain = (before - best_) / std::max(std::abs(before), 1e-12);
    if (gain < tol_) return StopReason::Plateau;
  }
  if (seen() >= max_iters_) return StopReason::MaxIters;
  return std::nullopt;
}

}  // namespace seedselect::seed
