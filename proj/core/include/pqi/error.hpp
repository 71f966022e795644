#pragma once

#include <stdexcept>
#include <string>

namespace pqi {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad caller input: violated preconditions, inconsistent dimensions.
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// Unreadable or malformed external data (images, detection files, CSV, checkpoints).
class DataError : public Error {
public:
  using Error::Error;
};

/// Image files that cannot be decoded into 8-bit RGB.
class DecodeError : public DataError {
public:
  using DataError::DataError;
};

/// Non-finite values during forward/backward passes or training.
class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace pqi
