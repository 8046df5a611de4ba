#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace cca {

/// Failure categories. Each maps to a distinct CLI exit code.
enum class ErrorKind {
  Domain,      // non-physical input (u <= f, log of nonpositive, ...)
  Range,       // value outside an invertible or searchable range
  Size,        // image or window too small
  Shape,       // tensor shape mismatch
  Io,          // missing or unreadable file
  UnknownKey,  // config key not recognized
  Config,      // malformed config value
  Mismatch,    // dataset/model/lens configuration disagree
  NoCue,       // patch below the gradient threshold
  Numeric,     // NaN or Inf encountered
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Domain: return "domain";
    case ErrorKind::Range: return "range";
    case ErrorKind::Size: return "size";
    case ErrorKind::Shape: return "shape";
    case ErrorKind::Io: return "io";
    case ErrorKind::UnknownKey: return "unknown_key";
    case ErrorKind::Config: return "config";
    case ErrorKind::Mismatch: return "mismatch";
    case ErrorKind::NoCue: return "no_cue";
    case ErrorKind::Numeric: return "numeric";
  }
  return "unknown";
}

constexpr int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnknownKey: return 3;
    case ErrorKind::Config: return 4;
    case ErrorKind::Io: return 5;
    case ErrorKind::Mismatch: return 6;
    case ErrorKind::Domain: return 7;
    case ErrorKind::Range: return 8;
    case ErrorKind::Size: return 9;
    case ErrorKind::Shape: return 10;
    case ErrorKind::NoCue: return 11;
    case ErrorKind::Numeric: return 12;
  }
  return 1;
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace cca
