#pragma once

#include <stdexcept>
#include <string>

namespace ltsar {

/// Broad failure class. Drives CLI exit codes (Io -> 2, everything else -> 1).
enum class ErrorKind {
  Io,
  Format,
  Validation,
  Dimension,
  Degenerate,
  Target,
  Length,
  Empty,
  Range,
  Config,
  MissingPair,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "IoError";
    case ErrorKind::Format: return "FormatError";
    case ErrorKind::Validation: return "ValidationError";
    case ErrorKind::Dimension: return "DimensionError";
    case ErrorKind::Degenerate: return "DegenerateError";
    case ErrorKind::Target: return "TargetError";
    case ErrorKind::Length: return "LengthError";
    case ErrorKind::Empty: return "EmptyError";
    case ErrorKind::Range: return "RangeError";
    case ErrorKind::Config: return "ConfigError";
    case ErrorKind::MissingPair: return "MissingPairError";
  }
  return "Error";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& detail)
      : std::runtime_error(std::string(to_string(kind)) + ": " + detail), kind_(kind), detail_(detail) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Message without the error-class prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorKind kind_;
  std::string detail_;
};

template <ErrorKind K>
class TypedError : public Error {
 public:
  explicit TypedError(const std::string& what) : Error(K, what) {}
};

using IoError = TypedError<ErrorKind::Io>;
using FormatError = TypedError<ErrorKind::Format>;
using ValidationError = TypedError<ErrorKind::Validation>;
// Query/vector dimension mismatches use the same class as raster size errors.
using DimensionError = TypedError<ErrorKind::Dimension>;
using DimError = DimensionError;
using DegenerateError = TypedError<ErrorKind::Degenerate>;
using TargetError = TypedError<ErrorKind::Target>;
using LengthError = TypedError<ErrorKind::Length>;
using EmptyError = TypedError<ErrorKind::Empty>;
using RangeError = TypedError<ErrorKind::Range>;
using ConfigError = TypedError<ErrorKind::Config>;
using MissingPairError = TypedError<ErrorKind::MissingPair>;

/// Rethrows `e` as the same concrete error type with `context` prepended.
[[noreturn]] inline void rethrow_with_context(const Error& e, const std::string& context) {
  const std::string msg = context + ": " + e.detail();
  switch (e.kind()) {
    case ErrorKind::Io: throw IoError(msg);
    case ErrorKind::Format: throw FormatError(msg);
    case ErrorKind::Validation: throw ValidationError(msg);
    case ErrorKind::Dimension: throw DimensionError(msg);
    case ErrorKind::Degenerate: throw DegenerateError(msg);
    case ErrorKind::Target: throw TargetError(msg);
    case ErrorKind::Length: throw LengthError(msg);
    case ErrorKind::Empty: throw EmptyError(msg);
    case ErrorKind::Range: throw RangeError(msg);
    case ErrorKind::Config: throw ConfigError(msg);
    case ErrorKind::MissingPair: throw MissingPairError(msg);
  }
  throw Error(e.kind(), msg);
}

}  // namespace ltsar
