#pragma once

#include <stdexcept>
#include <string>

namespace eil {

/// Base of every error raised by the library. The CLI maps the concrete
/// subclasses onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid arguments or flags supplied by a caller.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files or data that violate a type invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite losses, divergence, or a generator that cannot meet its
/// constraints.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace eil
