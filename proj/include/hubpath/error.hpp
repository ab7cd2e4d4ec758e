#pragma once

#include <stdexcept>
#include <string>

namespace hubpath {

// Exception families. The CLI maps each family onto a process exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller handed us something malformed: shapes, indices, configuration values.
class UsageError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public UsageError {
 public:
  using UsageError::UsageError;
};

class ConfigError : public UsageError {
 public:
  using UsageError::UsageError;
};

// Persisted data could not be read back.
class DataError : public Error {
 public:
  using Error::Error;
};

class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class TruncatedError : public DataError {
 public:
  using DataError::DataError;
};

class DigestError : public DataError {
 public:
  using DataError::DataError;
};

// A forward or backward pass produced NaN/Inf.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace hubpath
