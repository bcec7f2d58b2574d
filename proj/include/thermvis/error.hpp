#pragma once

#include <stdexcept>
#include <string>

namespace thermvis {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument (range tag, weight sign, ...) was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions do not satisfy an operation's shape constraint.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or malformed data (images, manifests).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Checkpoint missing, truncated or incompatible.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

/// A loss term became NaN or infinite during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace thermvis
