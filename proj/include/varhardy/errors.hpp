#pragma once

#include <stdexcept>
#include <string>

namespace varhardy {

/// Base class of every error the library throws. The CLI maps each
/// subclass onto its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input data: bad partitions, probabilities, stopping times.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A request that would exceed a configured size cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// An iterative method failed to converge. Carries the last bracket.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, double lo, double hi)
      : Error(what), lo_(lo), hi_(hi) {}

  double lo() const { return lo_; }
  double hi() const { return hi_; }

 private:
  double lo_;
  double hi_;
};

}  // namespace varhardy
