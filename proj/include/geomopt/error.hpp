#pragma once

#include <stdexcept>
#include <string>

namespace geomopt {

/// Base class of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user-supplied configuration (geometry, phantom, optimizer, CLI).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Array shapes or lengths that do not agree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A world point projected with non-positive homogeneous depth.
class BehindSourceError : public Error {
 public:
  using Error::Error;
};

/// Objective or gradient produced NaN/Inf.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class MissingFileError : public IoError {
 public:
  using IoError::IoError;
};

class MalformedHeaderError : public IoError {
 public:
  using IoError::IoError;
};

class ByteCountMismatchError : public IoError {
 public:
  using IoError::IoError;
};

}  // namespace geomopt
