#pragma once

#include <stdexcept>
#include <string>

namespace seqemp {

// Invalid configuration or argument (bad spec parameters, empty grids, index
// out of range, ...).
class ParameterError : public std::invalid_argument {
 public:
  explicit ParameterError(const std::string& what) : std::invalid_argument(what) {}
};

// Argument outside the mathematical domain of a function, e.g. a CDF queried
// outside the unit cube.
class DomainError : public std::domain_error {
 public:
  explicit DomainError(const std::string& what) : std::domain_error(what) {}
};

// Numerical breakdown, e.g. a covariance factorization that still fails after
// the maximal diagonal jitter.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace seqemp
