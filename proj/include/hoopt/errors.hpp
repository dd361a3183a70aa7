#pragma once

#include <stdexcept>
#include <string>

namespace hoopt {

enum class ErrorKind {
  input,
  domain,
  usage,
  unsupported,
  numerical,
  precondition,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Malformed files, missing fields, bad indices.
class InputError : public Error {
 public:
  explicit InputError(const std::string& message) : Error(ErrorKind::input, message) {}
};

// Arguments outside the mathematical domain of an operation.
class DomainError : public Error {
 public:
  explicit DomainError(const std::string& message) : Error(ErrorKind::domain, message) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message) : Error(ErrorKind::usage, message) {}
};

class UnsupportedError : public Error {
 public:
  explicit UnsupportedError(const std::string& message)
      : Error(ErrorKind::unsupported, message) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& message) : Error(ErrorKind::numerical, message) {}
};

class PreconditionError : public Error {
 public:
  explicit PreconditionError(const std::string& message)
      : Error(ErrorKind::precondition, message) {}
};

}  // namespace hoopt
