#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "seedselect/core/error.hpp"

namespace seedselect::ad {

using Index = Eigen::Index;
using Shape = std::vector<Index>;

inline Index numel(const Shape& shape) {
  Index n = 1;
  for (Index d : shape) n *= d;
  return n;
}

/// Dense row-major tensor. Scalars are represented with shape {1}.
template <typename Scalar_>
class Tensor {
 public:
  using Scalar = Scalar_;
  using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;
  using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  using MatrixMap = Eigen::Map<RowMatrix>;
  using ConstMatrixMap = Eigen::Map<const RowMatrix>;

  Tensor() : shape_{1}, data_(Array::Zero(1)) {}

  explicit Tensor(Shape shape, Scalar fill = Scalar(0)) : shape_(std::move(shape)) {
    validate_shape();
    data_ = Array::Constant(numel(shape_), fill);
  }

  Tensor(Shape shape, Array data) : shape_(std::move(shape)), data_(std::move(data)) {
    validate_shape();
    if (data_.size() != numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  Tensor(Shape shape, std::initializer_list<Scalar> values)
      : Tensor(std::move(shape), from_list(values)) {}

  static Tensor scalar(Scalar v) { return Tensor(Shape{1}, v); }
  static Tensor zeros(Shape shape) { return Tensor(std::move(shape), Scalar(0)); }
  static Tensor ones(Shape shape) { return Tensor(std::move(shape), Scalar(1)); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape_, Scalar(0)); }

  const Shape& shape() const { return shape_; }
  Index rank() const { return static_cast<Index>(shape_.size()); }
  Index dim(Index axis) const { return shape_[static_cast<std::size_t>(axis < 0 ? axis + rank() : axis)]; }
  Index size() const { return data_.size(); }

  Array& data() { return data_; }
  const Array& data() const { return data_; }
  Scalar* ptr() { return data_.data(); }
  const Scalar* ptr() const { return data_.data(); }

  Scalar& operator[](Index i) { return data_[i]; }
  Scalar operator[](Index i) const { return data_[i]; }

  Scalar item() const {
    if (size() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_string(shape_));
    return data_[0];
  }

  /// View the tensor as a rows x cols row-major matrix.
  MatrixMap matrix(Index rows, Index cols) { return MatrixMap(ptr(), rows, cols); }
  ConstMatrixMap matrix(Index rows, Index cols) const { return ConstMatrixMap(ptr(), rows, cols); }

  Tensor reshaped(Shape shape) const {
    if (numel(shape) != size()) {
      throw ShapeError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename Other>
  Tensor<Other> cast() const {
    return Tensor<Other>(shape_, data_.template cast<Other>());
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  static Array from_list(std::initializer_list<Scalar> values) {
    Array a(static_cast<Index>(values.size()));
    Index i = 0;
    for (Scalar v : values) a[i++] = v;
    return a;
  }

  void validate_shape() const {
    if (shape_.empty()) throw ShapeError("tensor shape must have at least one extent");
    for (Index d : shape_) {
      if (d < 1) throw ShapeError("tensor extents must be >= 1, got " + shape_string(shape_));
    }
  }

  Shape shape_;
  Array data_;
};

}  // namespace seedselect::ad
