#pragma once

#include <stdexcept>
#include <string>

namespace crstd {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input: malformed files, missing columns, inconsistent requests.
// The CLI maps these to exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Numerical failure during fitting or standardisation.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace crstd
