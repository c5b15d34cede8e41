#pragma once

#include <stdexcept>
#include <string>

namespace elfdd {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible tensor shapes or dtypes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Out-of-range argument or configuration value.
class ValueError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file.
class FormatError : public Error {
 public:
  using Error::Error;
};

// NaN or infinity detected during a computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Bad experiment configuration (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace elfdd
