#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace csma {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Vector length does not match the number of links.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// An enumeration or exhaustive computation would exceed its configured cap.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::size_t cap) : Error(what), cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
};

// Argument outside its mathematical domain (rates outside (0,1), p_k outside (0,1), ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

// Invalid graph / config file contents.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Linear-program or linear-solve failure. The certificate describes the residuals seen.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, std::string certificate)
      : Error(what + " [" + certificate + "]"), certificate_(std::move(certificate)) {}
  const std::string& certificate() const noexcept { return certificate_; }

 private:
  std::string certificate_;
};

// Iterative method hit its iteration cap. Carries the best iterate found.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::vector<double> best, double residual)
      : Error(what), best_(std::move(best)), residual_(residual) {}
  const std::vector<double>& best_iterate() const noexcept { return best_; }
  double residual() const noexcept { return residual_; }

 private:
  std::vector<double> best_;
  double residual_;
};

// A simulator state broke one of its structural invariants. Always a bug.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace csma
