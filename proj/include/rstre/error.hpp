#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rstre {

enum class ErrorKind {
  InvalidArgument,
  Parse,
  RetryExhausted,
  UnsupportedRange,
  Unsupported,
  Disconnected,
  NumericalFailure,
  NonTermination,
  TooLarge,
  InvalidCutset,
  PreconditionFailed,
  CheckFailed,
  Io,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::Parse: return "parse-error";
    case ErrorKind::RetryExhausted: return "retry-exhausted";
    case ErrorKind::UnsupportedRange: return "unsupported-range";
    case ErrorKind::Unsupported: return "unsupported";
    case ErrorKind::Disconnected: return "disconnected";
    case ErrorKind::NumericalFailure: return "numerical-failure";
    case ErrorKind::NonTermination: return "nontermination-suspected";
    case ErrorKind::TooLarge: return "too-large";
    case ErrorKind::InvalidCutset: return "invalid-cutset";
    case ErrorKind::PreconditionFailed: return "precondition-failed";
    case ErrorKind::CheckFailed: return "check-failed";
    case ErrorKind::Io: return "io-error";
  }
  return "unknown";
}

/// Every failure raised by the library carries one of the categories above so
/// that callers (and the CLI exit-code mapping) can branch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

inline void require(bool condition, ErrorKind kind, const std::string& message) {
  if (!condition) fail(kind, message);
}

}  // namespace rstre
