#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace tspsel {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Invalid generator specification (bounds, counts).
class SpecError : public Error {
public:
  using Error::Error;
};

/// Degenerate or unknown named parameter.
class ParameterError : public Error {
public:
  using Error::Error;
};

/// Malformed input file. Carries the 1-based line number (0 when unknown).
class ParseError : public Error {
public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line == 0 ? what : "line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Argument outside the mathematical domain of an operation.
class DomainError : public Error {
public:
  using Error::Error;
};

/// Point set with fewer than two distinct points.
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

class InvalidTourError : public Error {
public:
  using Error::Error;
};

class SizeError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

/// Non-finite values in a numeric kernel.
class NumericError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Caller broke an API contract (e.g. stale forward cache).
class ContractError : public Error {
public:
  using Error::Error;
};

}  // namespace tspsel
