#pragma once

#include <stdexcept>
#include <string>

namespace femseg {

/// Failure categories surfaced by the toolkit. The CLI maps these onto
/// process exit codes; tests assert on them directly.
enum class ErrorKind {
  Config,           // invalid run configuration or parameter combination
  Ingestion,        // referenced input missing or unreadable
  Format,           // malformed on-disk structure (named field in message)
  UnsupportedType,  // recognized structure, unsupported variant
  SizeMismatch,     // payload length disagrees with declared dimensions
  Capacity,         // value does not fit the on-disk field width
  Shape,            // tensor/grid dimension mismatch
  Geometry,         // inconsistent spatial bookkeeping
  Degenerate,       // input outside an operation's mathematical domain
  Arity,            // count of provided pieces does not match the plan
  Pairing,          // prediction/ground-truth case mismatch
  Compatibility,    // checkpoint/config disagreement
  Processing,       // failure while producing outputs
};

inline const char* to_string(ErrorKind k) {
  switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::Ingestion: return "ingestion";
    case ErrorKind::Format: return "format";
    case ErrorKind::UnsupportedType: return "unsupported-type";
    case ErrorKind::SizeMismatch: return "size-mismatch";
    case ErrorKind::Capacity: return "capacity";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Geometry: return "geometry";
    case ErrorKind::Degenerate: return "degenerate-input";
    case ErrorKind::Arity: return "arity";
    case ErrorKind::Pairing: return "pairing";
    case ErrorKind::Compatibility: return "compatibility";
    case ErrorKind::Processing: return "processing";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace femseg
