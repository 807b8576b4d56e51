#pragma once

#include <stdexcept>
#include <string>

namespace qpburst {

/// Base for all library errors; the CLI maps subclasses to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

/// Phonon energy below 2*Delta: it cannot break Cooper pairs.
class BelowGap : public InvalidParameter {
 public:
  using InvalidParameter::InvalidParameter;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, std::size_t column,
             const std::string& what)
      : Error(file + ":" + std::to_string(line) + ":" + std::to_string(column) +
              ": " + what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace qpburst
