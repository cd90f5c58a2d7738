#pragma once

#include <stdexcept>
#include <string>

namespace flmn {

// Base class for all errors raised by the library.
struct Error : std::runtime_error {
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Graph construction or evaluation failed (shape rule violated, NaN produced, ...).
struct GraphError : Error {
  using Error::Error;
};

// Bad run configuration (unknown key, missing value, out-of-range field).
struct ConfigError : Error {
  using Error::Error;
};

// Dataset could not be loaded or failed validation.
struct DatasetError : Error {
  using Error::Error;
};

// Checkpoint file is corrupt, truncated, or has the wrong version.
struct CheckpointError : Error {
  using Error::Error;
};

// Training produced a non-finite loss.
struct NumericError : Error {
  using Error::Error;
};

}  // namespace flmn
