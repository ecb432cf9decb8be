#pragma once

#include <stdexcept>
#include <string>

namespace shapecox {

// Base of every error the library throws on bad input or failed numerics.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Column mapping does not match the file (missing column, bad header).
class SchemaError : public Error {
 public:
  using Error::Error;
};

// Cell that does not parse as a number.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Values that parse but violate a data invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// Rank deficiency, singular Hessian or covariance.
class SingularError : public Error {
 public:
  using Error::Error;
};

// Optimizer or inner solver could not reach a valid answer.
class FitError : public Error {
 public:
  using Error::Error;
};

}  // namespace shapecox
