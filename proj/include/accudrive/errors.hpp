#pragma once

#include <stdexcept>
#include <string>

namespace accudrive {

// Base of every error raised by the library. The CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Raised for malformed or inconsistent input files.
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Zero-variance channels, all-zero masks and similar degenerate inputs.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace accudrive
