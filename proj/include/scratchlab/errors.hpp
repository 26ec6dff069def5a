#pragma once

#include <stdexcept>
#include <string>

namespace scratchlab {

/// Shape or index contract violated by a caller.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared where only finite values are allowed.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or parameter value.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A sequence does not fit the model's context window.
class ContextOverflow : public std::length_error {
 public:
  using std::length_error::length_error;
};

/// Malformed or truncated checkpoint / data file.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace scratchlab
