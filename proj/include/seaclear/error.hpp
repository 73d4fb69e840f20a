#pragma once

#include <stdexcept>
#include <string>

namespace seaclear {

// Shapes or channel counts that do not line up.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Value outside the domain where an operation is defined (negative depth,
// transmission below the floor, zero background light, ...).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Homography whose projective denominator approaches zero on the grid.
class SingularTransformError : public DomainError {
 public:
  using DomainError::DomainError;
};

// Invalid hyperparameter or option value (even patch size, dropout >= 1, ...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A function under evaluation produced a non-finite value.
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace seaclear
