#pragma once

#include <stdexcept>
#include <string>

namespace cfp {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or API misuse (bad lambda, unknown coder, ...).
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Missing or malformed files, absent manifest entries, insufficient data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, singular systems, degenerate fits.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace cfp
