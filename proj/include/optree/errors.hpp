#pragma once

#include <stdexcept>
#include <string>

namespace optree {

// Base class for all library errors.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid hyperparameters, flags, or option combinations.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed text input: region codes, CSV, JSON schemas.
struct ParseError : Error {
  using Error::Error;
};

// Bad numeric data (NaN/Inf entries, out-of-box samples, empty input).
struct DataError : Error {
  using Error::Error;
};

// A configured budget was exhausted (cache entries, wall clock, depth).
struct ResourceError : Error {
  using Error::Error;
};

// Violated internal invariant; indicates a bug in the caller or library.
struct InternalError : Error {
  using Error::Error;
};

}  // namespace optree
