#pragma once

#include <cmath>
#include <vector>

#include "seedselect/autodiff/var.hpp"

namespace seedselect::ad {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.0;  // decoupled (AdamW)
};

/// First-order adaptive-moment optimizer over a fixed list of leaf tensors.
template <typename Scalar>
class Adam {
 public:
  Adam(std::vector<Var<Scalar>> params, AdamConfig config) : params_(std::move(params)), config_(config) {
    for (const auto& p : params_) {
      m_.push_back(Tensor<Scalar>::zeros_like(p.value()));
      v_.push_back(Tensor<Scalar>::zeros_like(p.value()));
    }
  }

  void step(const std::vector<Tensor<Scalar>>& grads) { step(grads, config_.learning_rate); }

  void step(const std::vector<Tensor<Scalar>>& grads, double learning_rate) {
    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    const auto lr = static_cast<Scalar>(learning_rate);
    for (std::size_t i = 0; i < params_.size(); ++i) {
      auto& m = m_[i].data();
      auto& v = v_[i].data();
      const auto& g = grads[i].data();
      auto& w = params_[i].mutable_value().data();
      m = static_cast<Scalar>(b1) * m + static_cast<Scalar>(1.0 - b1) * g;
      v = static_cast<Scalar>(b2) * v + static_cast<Scalar>(1.0 - b2) * g.square();
      if (config_.weight_decay > 0.0) w -= lr * static_cast<Scalar>(config_.weight_decay) * w;
      w -= lr * (m / static_cast<Scalar>(c1)) /
           ((v / static_cast<Scalar>(c2)).sqrt() + static_cast<Scalar>(config_.epsilon));
    }
  }

  long steps() const { return t_; }
  const std::vector<Var<Scalar>>& params() const { return params_; }

 private:
  std::vector<Var<Scalar>> params_;
  AdamConfig config_;
  std::vector<Tensor<Scalar>> m_, v_;
  long t_ = 0;
};

}  // namespace seedselect::ad
