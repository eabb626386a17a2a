#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "seedselect/autodiff/ops.hpp"
#include "seedselect/core/hash.hpp"
#include "seedselect/core/rng.hpp"

namespace seedselect::nn {

using ad::Index;
using ad::Shape;
using ad::Tensor;
using ad::Var;

/// Named, ordered model weights. Insertion order is the serialization order.
template <typename S>
class ParameterSet {
 public:
  Var<S> add(const std::string& name, Tensor<S> init) {
    if (index_.contains(name)) throw std::invalid_argument("duplicate parameter " + name);
    index_[name] = vars_.size();
    names_.push_back(name);
    vars_.push_back(Var<S>::leaf(std::move(init), trainable_));
    return vars_.back();
  }

  const std::vector<Var<S>>& vars() const { return vars_; }
  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return vars_.size(); }

  const Var<S>& get(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw std::out_of_range("no parameter named " + name);
    return vars_[it->second];
  }

  void set_trainable(bool on) {
    trainable_ = on;
    for (auto& v : vars_) v.set_requires_grad(on);
  }
  bool trainable() const { return trainable_; }

  /// Copy values in by name; every parameter must be present with its shape.
  template <typename T>
  void assign(const std::map<std::string, Tensor<T>>& values) {
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      auto it = values.find(names_[i]);
      if (it == values.end()) throw std::invalid_argument("missing parameter " + names_[i]);
      if (it->second.shape() != vars_[i].shape()) {
        throw ShapeError("parameter " + names_[i] + " has shape " + shape_string(it->second.shape()) +
                         ", expected " + shape_string(vars_[i].shape()));
      }
      vars_[i].mutable_value() = it->second.template cast<S>();
    }
  }

  std::map<std::string, Tensor<S>> tensors() const {
    std::map<std::string, Tensor<S>> out;
    for (std::size_t i = 0; i < vars_.size(); ++i) out.emplace(names_[i], vars_[i].value());
    return out;
  }

  /// Fingerprint of names, shapes and raw values.
  std::uint64_t hash() const {
    Fnv1a h;
    for (std::size_t i = 0; i < vars_.size(); ++i) {
      h.update(names_[i]);
      for (Index d : vars_[i].shape()) h.update_value(d);
      h.update(vars_[i].value().ptr(), sizeof(S) * static_cast<std::size_t>(vars_[i].size()));
    }
    return h.digest();
  }

  template <typename T>
  void copy_from(const ParameterSet<T>& other) {
    assign(other.tensors());
  }

 private:
  std::vector<std::string> names_;
  std::vector<Var<S>> vars_;
  std::map<std::string, std::size_t> index_;
  bool trainable_ = true;
};

template <typename S>
Tensor<S> uniform_init(Shape shape, Index fan_in, Rng& rng) {
  Tensor<S> t(std::move(shape));
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<S>(rng.uniform(-bound, bound));
  return t;
}

template <typename S>
struct Conv2d {
  Var<S> weight, bias;
  ad::Conv2dOptions opt;

  Conv2d() = default;
  Conv2d(ParameterSet<S>& params, const std::string& name, Index in, Index out, Index kernel, Index stride,
         Index padding, Rng& rng)
      : opt{stride, padding} {
    const Index fan_in = in * kernel * kernel;
    weight = params.add(name + ".weight", uniform_init<S>({out, in, kernel, kernel}, fan_in, rng));
    bias = params.add(name + ".bias", uniform_init<S>({out}, fan_in, rng));
  }

  Var<S> operator()(const Var<S>& x) const { return ad::conv2d(x, weight, bias, opt); }
};

template <typename S>
struct Linear {
  Var<S> weight, bias;

  Linear() = default;
  Linear(ParameterSet<S>& params, const std::string& name, Index in, Index out, Rng& rng) {
    weight = params.add(name + ".weight", uniform_init<S>({in, out}, in, rng));
    bias = params.add(name + ".bias", uniform_init<S>({out}, in, rng));
  }

  Var<S> operator()(const Var<S>& x) const { return ad::linear(x, weight, bias); }
};

/// Stack [1, ...] tensors into a batch [N, ...].
template <typename S>
Tensor<S> stack(const std::vector<Tensor<S>>& items) {
  if (items.empty()) throw ShapeError("stack of zero tensors");
  Shape shape = items.front().shape();
  const Index per = items.front().size();
  Shape out_shape = shape;
  if (out_shape.front() == 1) {
    out_shape.front() = static_cast<Index>(items.size());
  } else {
    out_shape.insert(out_shape.begin(), static_cast<Index>(items.size()));
  }
  Tensor<S> out(out_shape);
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (items[i].size() != per) throw ShapeError("stack: " + shape_string(items[i].shape()) + " vs " + shape_string(shape));
    std::copy_n(items[i].ptr(), per, out.ptr() + static_cast<Index>(i) * per);
  }
  return out;
}

/// Row `i` of a batch as a [1, ...] tensor.
template <typename S>
Tensor<S> unstack(const Tensor<S>& batch, Index i) {
  Shape shape = batch.shape();
  const Index per = batch.size() / shape.front();
  shape.front() = 1;
  Tensor<S> out(shape);
  std::copy_n(batch.ptr() + i * per, per, out.ptr());
  return out;
}

}  // namespace seedselect::nn
