#pragma once

#include <stdexcept>
#include <string>

namespace rbp {

// Invalid constructor or operation parameters (beta <= 0, bad tolerances...).
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Quadrature, ODE or root-finding failure. The message carries diagnostics.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A rejection or replicate budget was exhausted before the target was met.
class BudgetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rbp

namespace rbp {

// Degenerate input to a statistical test (empty sample, too few buckets...).
class StatisticsError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace rbp
