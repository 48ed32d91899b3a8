#pragma once

#include <stdexcept>
#include <string>

namespace dvio {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Image or tensor dimensions unsuitable for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Malformed text or binary input. Carries the 1-based line number when known.
class ParseError : public Error {
 public:
  ParseError(const std::string& file, std::size_t line, const std::string& what)
      : Error(file + (line ? ":" + std::to_string(line) : std::string()) + ": " + what),
        file_(file),
        line_(line) {}

  const std::string& file() const noexcept { return file_; }
  std::size_t line() const noexcept { return line_; }

 private:
  std::string file_;
  std::size_t line_;
};

class TimestampError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class MissingInputError : public Error {
 public:
  using Error::Error;
};

// Argument outside the operation's domain (non-positive height or dt).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Under-determined or degenerate geometry (collinear points, empty pairing).
class DegenerateError : public Error {
 public:
  using Error::Error;
};

}  // namespace dvio
