#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace athv {

enum class ErrorCode {
  ShapeMismatch,
  InvalidArgument,
  Infeasible,
  NonFinite,
  Corrupt,
  Io,
  Parse,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::ShapeMismatch: return "shape_mismatch";
    case ErrorCode::InvalidArgument: return "invalid_argument";
    case ErrorCode::Infeasible: return "infeasible";
    case ErrorCode::NonFinite: return "non_finite";
    case ErrorCode::Corrupt: return "corrupt";
    case ErrorCode::Io: return "io";
    case ErrorCode::Parse: return "parse";
  }
  return "unknown";
}

/// Structured error carried by every failing operation in the library.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& message) {
  if (!condition) throw Error(code, message);
}

}  // namespace athv
