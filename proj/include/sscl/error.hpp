#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sscl {

// Bad input data: malformed files, invalid records, inconsistent clips.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A line of a text file could not be parsed.
class ParseError : public DataError {
 public:
  ParseError(std::size_t line, const std::string& what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

// A syntactically valid record that violates a field constraint.
class RecordError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Invalid argument to an operation (negative step, fps_out > fps_in, ...).
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Inconsistent run configuration (batch too large, margin too wide, ...).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse, e.g. backward without a cached forward pass.
class UsageError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace sscl
