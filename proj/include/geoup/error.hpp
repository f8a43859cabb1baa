#pragma once

#include <stdexcept>
#include <string>

namespace geoup {

// Base of every error thrown by the library. The CLI maps subclasses to exit
// codes: NumericalError -> 3, everything else -> 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& message, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + message), line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class FormatError : public Error {
 public:
  using Error::Error;
};

class UnsupportedFormatError : public FormatError {
 public:
  using FormatError::FormatError;
};

class CorruptionError : public FormatError {
 public:
  using FormatError::FormatError;
};

class ArgumentError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class GeometryError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace geoup
