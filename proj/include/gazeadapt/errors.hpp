#pragma once

#include <stdexcept>
#include <string>

namespace gazeadapt {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller supplied something the operation cannot accept (dimension
/// mismatch, empty dataset, bad configuration value).
class InputError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// File content is truncated, corrupt or of an unknown format version.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint was written for a different network shape.
class ArchitectureMismatch : public Error {
 public:
  using Error::Error;
};

/// A loss or objective became NaN or infinite.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace gazeadapt
