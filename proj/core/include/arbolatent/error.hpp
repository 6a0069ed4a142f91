#pragma once

#include <stdexcept>
#include <string>

namespace arbolatent {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad input data, config values or CLI arguments.
struct ValidationError : Error {
  using Error::Error;
};

// Tensor extents do not match what an operation requires.
struct ShapeError : Error {
  using Error::Error;
};

// NaN/Inf produced by a primitive, or a non-finite loss.
struct NumericError : Error {
  using Error::Error;
};

// |det| below the relative threshold during inversion / log-determinant.
struct SingularMatrixError : NumericError {
  using NumericError::NumericError;
};

}  // namespace arbolatent
