#pragma once

#include <stdexcept>
#include <string>

namespace rfp {

// Bad user input: config files, overrides, invalid boxes or policies.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A pointwise function was evaluated outside its domain.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Nonlinear or linear solver failure, NaN in a step, I/O during a run.
class SolverError : public std::runtime_error {
 public:
  explicit SolverError(const std::string& what, double residual = 0.0)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

// Broken invariant inside the library. Always a bug.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace rfp
