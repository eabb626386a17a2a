#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace seedselect {

/// Operand shapes that cannot be combined.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed or incompatible on-disk artifact (checkpoint, manifest, config).
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown (NaN/Inf) during training or optimization.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string shape_string(const std::vector<long>& shape);

}  // namespace seedselect
