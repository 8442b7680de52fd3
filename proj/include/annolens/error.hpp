#pragma once

#include <stdexcept>
#include <string>

namespace annolens {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, missing inputs or stage prerequisites.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input data that violates a file schema or dataset invariant.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite densities, failed initialization and similar numerical faults.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace annolens
