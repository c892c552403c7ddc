#pragma once

#include <stdexcept>
#include <string>

namespace planexec {

/// Base class for all toolkit errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside its documented domain (bad range, dimension mismatch, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Non-finite value where a finite one is required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Operation invoked before its prerequisites were established.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Group too small for relative-advantage computation (needs >= 2 members).
class GroupTooSmallError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Marginal variance is zero at the requested time.
class SingularityError : public Error {
 public:
  using Error::Error;
};

/// No scorable payload could be extracted from a judge response.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A subscore lies outside its rubric range; carries the offending field name.
class RangeError : public Error {
 public:
  RangeError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

/// Request or response violates a backend role schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Transport failed after exhausting the retry budget.
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// File or stream I/O failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace planexec
