#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace satqkd {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An argument lies outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A value object violates one of its invariants. `field()` names the offender.
class InvariantError : public Error {
 public:
  InvariantError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Malformed tabular input. `row()` is 1-based and counts the header as row 1.
class ParseError : public Error {
 public:
  ParseError(std::size_t row, const std::string& what)
      : Error("row " + std::to_string(row) + ": " + what), row_(row) {}
  std::size_t row() const noexcept { return row_; }

 private:
  std::size_t row_;
};

class NoVisibilityError : public Error {
 public:
  using Error::Error;
};

class NoSolutionError : public Error {
 public:
  using Error::Error;
};

class ResolutionError : public Error {
 public:
  using Error::Error;
};

class NormalizationError : public Error {
 public:
  using Error::Error;
};

/// QBER requested where no coincidence can occur.
class UndefinedQberError : public Error {
 public:
  using Error::Error;
};

/// Scenario/config rejected before any computation started.
class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace satqkd
