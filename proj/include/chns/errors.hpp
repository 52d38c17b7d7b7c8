#pragma once

#include <stdexcept>

namespace chns {

/// Thrown when field or grid shapes do not match.
class StructuralError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Thrown when a viscosity sample is not symmetric positive definite or violates its declared bounds.
class CoefficientError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace chns
