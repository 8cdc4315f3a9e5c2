#pragma once

#include <stdexcept>
#include <string>

namespace sfde {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (e.g. theta outside [-tau, 0]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Inconsistent or invalid configuration: step sizes, grids, RunConfig keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, failed root brackets, degenerate fits.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace sfde
