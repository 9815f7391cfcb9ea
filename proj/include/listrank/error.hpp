#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace listrank {

// Base class for every failure raised by the toolkit.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Malformed input text. Carries the 1-based line number when one applies.
class ParseError : public Error {
public:
  ParseError(const std::string &what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

// A listwise backend could not produce a completion.
class BackendError : public Error {
public:
  using Error::Error;
};

} // namespace listrank
