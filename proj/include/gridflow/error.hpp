#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace gridflow {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed or semantically invalid input document. `line()` is the 1-based
/// line (native format) or record number (CDF); 0 when not tied to a line.
class ParseError : public Error {
  public:
    ParseError(const std::string& what, std::size_t line = 0)
        : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

    [[nodiscard]] std::size_t line() const noexcept { return line_; }

  private:
    std::size_t line_;
};

/// Raised when a network violates its structural invariants.
class ValidationError : public Error {
  public:
    using Error::Error;
};

class PowerFlowError : public Error {
  public:
    using Error::Error;
};

/// The power-flow Jacobian (or a sensitivity derived from it) cannot be inverted.
class SingularError : public PowerFlowError {
  public:
    using PowerFlowError::PowerFlowError;
};

/// Newton-Raphson hit its iteration cap or produced non-finite iterates.
class DivergenceError : public PowerFlowError {
  public:
    using PowerFlowError::PowerFlowError;
};

}  // namespace gridflow
