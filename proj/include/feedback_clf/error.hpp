#pragma once

#include <stdexcept>
#include <string>

namespace fbclf {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Unreadable, malformed or inconsistent input data (corpus files, model files).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Invalid hyperparameters or command-line configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Model file with wrong magic bytes or unsupported format version.
class FormatVersionError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not agree with an operation's contract.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced by an operation.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace fbclf
