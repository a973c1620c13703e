#pragma once

#include <stdexcept>
#include <string>

namespace brw {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A law, table or configuration violates its documented invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its precondition.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver failed to converge; carries the final residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// The problem has no solution (e.g. a degenerate law cannot be normalized).
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

/// A function was evaluated outside its domain.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An enumeration or allocation budget would be exceeded.
class BudgetError : public Error {
 public:
  BudgetError(const std::string& what, double required)
      : Error(what), required_(required) {}
  double required() const noexcept { return required_; }

 private:
  double required_;
};

/// An input file or named resource does not exist.
class NotFoundError : public Error {
 public:
  using Error::Error;
};

}  // namespace brw
