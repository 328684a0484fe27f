#pragma once

#include <stdexcept>
#include <string>

namespace affistack {

/// Base class for all library errors. The CLI maps each subclass onto an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input files or records.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Inputs that parse but are inconsistent (missing records, schema mismatch, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerically degenerate problems (constant vectors, empty fits, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace affistack
