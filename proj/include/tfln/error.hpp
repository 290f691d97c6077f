#pragma once

#include <stdexcept>
#include <string>

namespace tfln {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/layer dimension mismatches.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Bad arguments or configuration values.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Malformed textual input (CSV, JSON); message carries a line number or key.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Malformed binary input (checkpoint, wire frame); message carries a byte offset.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Operation not valid in the object's current state.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failures.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Failures raised by a running training loop (non-finite loss, exhausted input).
class TrainingError : public Error {
 public:
  using Error::Error;
};

/// Violations of internal protocols; indicates a bug in the framework, not in user input.
class InternalError : public Error {
 public:
  using Error::Error;
};

/// Transport-level failures (connect, send, receive).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// Configuration document errors. Carries a stable machine-readable code
/// alongside the human-readable message.
class ConfigError : public ValidationError {
 public:
  ConfigError(std::string code, const std::string& msg)
      : ValidationError(msg), code_(std::move(code)) {}

  const std::string& code() const { return code_; }

 private:
  std::string code_;
};

}  // namespace tfln
