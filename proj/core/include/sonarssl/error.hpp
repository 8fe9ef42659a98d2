#pragma once

#include <stdexcept>
#include <string>

namespace sonarssl {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A configuration value violates its documented constraints.
struct ConfigError : Error {
  using Error::Error;
};

// A runtime input (shape, path, argument) is unusable.
struct InputError : Error {
  using Error::Error;
};

// An on-disk container is malformed or truncated.
struct FormatError : Error {
  using Error::Error;
};

// A computation produced non-finite values or a singular system.
struct NumericError : Error {
  using Error::Error;
};

// A labeled pool is missing a class, so balanced splits cannot be built.
struct BalanceError : Error {
  using Error::Error;
};

// Label subsampling would round a class down to zero examples.
struct InsufficientLabelsError : Error {
  using Error::Error;
};

// A metric is undefined for the given inputs (e.g. single-class labels).
struct UndefinedMetricError : Error {
  using Error::Error;
};

}  // namespace sonarssl
