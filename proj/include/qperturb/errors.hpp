#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace qperturb {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class NotHermitianInput : public Error {
 public:
  using Error::Error;
};

class NotPositiveSemidefinite : public Error {
 public:
  using Error::Error;
};

class InvalidBellCoefficients : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Jacobi sweeps did not converge. Internal error for dim <= 4 input.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

class SolverDiverged : public Error {
 public:
  using Error::Error;
};

/// gamma_r^2 left the PSD clamp window; never expected for Hermitian gamma_r.
class NonPhysicalResult : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  ValidationError(std::size_t index, const std::string& reason)
      : Error("state " + std::to_string(index) + ": " + reason), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

}  // namespace qperturb
