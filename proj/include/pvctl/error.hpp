#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pvctl {

/// Base of every error raised by the library. The category decides the
/// process exit code used by the command-line driver.
class Error : public std::runtime_error {
 public:
  enum class Category { Config, Data, Convergence, Internal };

  Error(Category category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  Category category() const noexcept { return category_; }

 private:
  Category category_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(Category::Config, what) {}
};

/// Header or column layout does not match the expected schema.
class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& what) : Error(Category::Config, what) {}
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(Category::Data, "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(Category::Data, what) {}
};

/// A run of missing samples longer than the allowed interpolation span.
class GapError : public Error {
 public:
  GapError(std::string sensor, std::size_t first_row, std::size_t last_row, const std::string& what)
      : Error(Category::Data, what),
        sensor_(std::move(sensor)),
        first_row_(first_row),
        last_row_(last_row) {}

  const std::string& sensor() const noexcept { return sensor_; }
  std::size_t first_row() const noexcept { return first_row_; }
  std::size_t last_row() const noexcept { return last_row_; }

 private:
  std::string sensor_;
  std::size_t first_row_;
  std::size_t last_row_;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& what) : Error(Category::Data, what) {}
};

/// Metric whose denominator is empty or zero.
class MetricError : public Error {
 public:
  explicit MetricError(const std::string& what) : Error(Category::Data, what) {}
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::string trace)
      : Error(Category::Convergence, what), trace_(std::move(trace)) {}

  /// Message trace of the failing control step, one CSV line per message.
  const std::string& trace() const noexcept { return trace_; }

 private:
  std::string trace_;
};

class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& what) : Error(Category::Internal, what) {}
};

}  // namespace pvctl
