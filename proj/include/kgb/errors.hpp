#pragma once

#include <stdexcept>
#include <string>

namespace kgb {

// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Malformed or non-numeric input data.
class ParseError : public Error {
 public:
  using Error::Error;
};

// Dimension mismatch between related objects.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A precondition of an operation was violated.
class ContractError : public Error {
 public:
  using Error::Error;
};

// An enumeration or permutation cap would be exceeded. Callers that expose
// exit codes map this to a capacity refusal rather than a generic failure.
class CapacityError : public Error {
 public:
  using Error::Error;
};

// A metric is undefined on the given input (e.g. single-class AUC).
class MetricError : public Error {
 public:
  using Error::Error;
};

// A numerical routine failed its own consistency check.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace kgb
