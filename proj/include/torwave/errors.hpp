#pragma once

#include <stdexcept>
#include <string>

namespace torwave {

/// Operands live on tori of different dimension.
class DimensionMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Grid too coarse for the requested band limit.
class AliasingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed text input. `line()` is 1-based; 0 when not tied to a line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line),
        message_(what) {}

  int line() const noexcept { return line_; }
  /// The message without the line prefix.
  const std::string& message() const noexcept { return message_; }

 private:
  int line_;
  std::string message_;
};

/// Spectral mass pushed past the mode cap exceeded the configured fraction.
class TruncationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A synthesized schedule does not fit in its time budget.
class BudgetExhausted : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// No non-resonant glide time was found above the smallest allowed margin.
class NoAdmissibleTime : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace torwave
