#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace monosema {

struct MonosemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Shape disagreement between paired containers.
struct DimensionError : MonosemaError {
  using MonosemaError::MonosemaError;
};

/// A raw feature row with (numerically) zero norm cannot be unit-normalized.
struct ZeroRowError : MonosemaError {
  explicit ZeroRowError(std::size_t row)
      : MonosemaError("feature row " + std::to_string(row) + " has zero norm"),
        row_index(row) {}
  std::size_t row_index;
};

/// Bad configuration or CLI usage; maps to exit code 2.
struct ConfigError : MonosemaError {
  using MonosemaError::MonosemaError;
};

/// NaN/Inf encountered where finite values are required; maps to exit code 3.
struct NumericalError : MonosemaError {
  using MonosemaError::MonosemaError;
};

struct IoError : MonosemaError {
  using MonosemaError::MonosemaError;
};

struct BadMagic : IoError {
  using IoError::IoError;
};

struct TruncatedPayload : IoError {
  using IoError::IoError;
};

struct UnsupportedDtype : IoError {
  using IoError::IoError;
};

}  // namespace monosema
