#pragma once

#include <stdexcept>
#include <string>

namespace stylemetric {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed or unreadable input files.
class IoError : public Error {
public:
  using Error::Error;
};

/// A contract violation on an argument (wrong size, bad selection, ...).
class InvalidArgument : public Error {
public:
  using Error::Error;
};

/// A referenced id (model, metric, task) does not exist.
class NotFound : public Error {
public:
  using Error::Error;
};

/// Features and weights were produced under different descriptor configs.
class ConfigMismatch : public Error {
public:
  using Error::Error;
};

/// Geometry is unusable for the requested computation.
class GeometryError : public Error {
public:
  using Error::Error;
};

/// An external party did not answer in time.
class Timeout : public Error {
public:
  using Error::Error;
};

}  // namespace stylemetric
