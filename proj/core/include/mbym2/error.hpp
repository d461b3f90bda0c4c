#pragma once

#include <stdexcept>
#include <string>

namespace mbym2 {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad input: out-of-range parameter, malformed graph, inconsistent dimensions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not complete (non-PD matrix, non-finite density, ...).
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read, parsed or written.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace mbym2
