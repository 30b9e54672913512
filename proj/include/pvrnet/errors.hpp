#pragma once

#include <stdexcept>
#include <string>

namespace pvr {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that cannot be combined by the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Invalid argument values (labels out of range, unknown class, bad k, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// API misuse (backward on a non-scalar, stepping without gradients, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed, truncated or incompatible files and checkpoints.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Training diverged or otherwise could not continue.
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Configuration rejected by validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace pvr
