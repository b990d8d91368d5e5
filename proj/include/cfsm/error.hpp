#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cfsm {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text (CSV row, JSON document). Carries the 1-based line
/// number when one is known, 0 otherwise.
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line = 0)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Well-formed input whose content violates a domain invariant.
class DataError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
public:
  using Error::Error;
};

}  // namespace cfsm
