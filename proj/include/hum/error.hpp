#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hum {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed command text. Line and column are 1-based.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line, std::size_t column)
      : Error(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

/// Violation of a modeling precondition (unknown variable, bad weights, ...).
class ModelError : public Error {
 public:
  using Error::Error;
};

/// Every world is ruled out by the nogood database.
class ContradictionError : public Error {
 public:
  using Error::Error;
};

/// Disagreement between the label evaluator and the brute-force oracle.
class VerificationError : public Error {
 public:
  using Error::Error;
};

}  // namespace hum
