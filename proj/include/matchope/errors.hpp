#pragma once

#include <stdexcept>
#include <string>

namespace matchope {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Matrix/vector dimensions disagree.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// An operation was called on inputs outside its domain (e.g. a zero propensity).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A configuration is invalid or an estimator lacks a required model field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// External data (files, records) violates a documented invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A computation produced a non-finite value.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace matchope
