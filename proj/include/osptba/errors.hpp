#pragma once

#include <stdexcept>
#include <string>

namespace osptba {

// Argument lands on (or within 1e-12 of) a pole of a rational coefficient.
class PoleError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Requested system is too large (or too small) for dense storage.
class SizeGuardError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Iterative solver ran out of iterations or hit a singular step.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, int iterations, double residual)
      : std::runtime_error(what), iterations_(iterations), residual_(residual) {}

  int iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  int iterations_;
  double residual_;
};

// Non-finite values, negative densities, broken consistency checks.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace osptba
