#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace dialogcode {

// Base of every error the library throws. `kind()` is a stable snake_case tag
// (e.g. "duplicate_id") that the CLI and HTTP layers surface verbatim.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Bad input data: malformed files, invariant violations, unknown labels.
class ValidationError : public Error {
 public:
  using Error::Error;
};

// A located failure while reading a text document. Lines are 1-based.
class ParseError : public ValidationError {
 public:
  ParseError(std::string kind, std::size_t line, const std::string& message)
      : ValidationError(std::move(kind), "line " + std::to_string(line) + ": " + message),
        line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class UnknownLabelError : public ValidationError {
 public:
  explicit UnknownLabelError(std::string label)
      : ValidationError("unknown_label", "unknown code label '" + label + "'"),
        label_(std::move(label)) {}

  const std::string& label() const noexcept { return label_; }

 private:
  std::string label_;
};

class BudgetError : public ValidationError {
 public:
  BudgetError(std::size_t estimate, std::size_t budget)
      : ValidationError("over_budget", "instruction document needs ~" + std::to_string(estimate) +
                                           " tokens, budget is " + std::to_string(budget)),
        estimate_(estimate),
        budget_(budget) {}

  std::size_t estimate() const noexcept { return estimate_; }
  std::size_t budget() const noexcept { return budget_; }

 private:
  std::size_t estimate_;
  std::size_t budget_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Transport-level failure talking to a coding backend.
class BackendError : public Error {
 public:
  explicit BackendError(const std::string& message) : Error("backend_failure", message) {}
};

// Filesystem or persistence failure.
class StoreError : public Error {
 public:
  using Error::Error;
};

}  // namespace dialogcode
