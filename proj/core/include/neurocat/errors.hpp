#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace neurocat {

// Base of every error the library throws. Callers that only need a message
// can catch this; the subclasses let the CLI map failures to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. `line()` is 1-based, 0 when not tied to a line.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Input parsed but breaks a data invariant (non-finite value, zero vector, ...).
class ValidationError : public Error {
 public:
  ValidationError(std::size_t line, const std::string& what)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  explicit ValidationError(const std::string& what) : ValidationError(0, what) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DimensionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

// Bad argument to a computational routine (empty input, n < k, length mismatch).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// The statistic is undefined for this input (all ties, zero variance, ...).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class TransportError : public Error {
 public:
  using Error::Error;
};

// The prompt backend answered, but not in the required format.
class BackendFormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace neurocat
