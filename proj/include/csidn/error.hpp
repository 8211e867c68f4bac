// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace csidn {

// Error taxonomy. The CLI maps each type to a stable exit code and a
// machine-parsable single-line category prefix.

// Invalid configuration value (unknown key, bad range, unsupported name).
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/matrix shape mismatch, including invalid batch sizes.
struct DimensionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File system failure; message carries the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad magic/version or truncated binary payload.
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Operation invoked in an invalid order (e.g. backward before forward,
// training stage without its prerequisite checkpoint).
struct StateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Value outside the scaling bounds of a dataset.
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Degenerate numeric input: zero-norm codeword or zero-norm reference row.
struct DegenerateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace csidn
