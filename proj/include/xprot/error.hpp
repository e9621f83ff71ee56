#pragma once

#include <stdexcept>
#include <string>

namespace xprot {

enum class ErrorCode {
  dimension_mismatch,
  invalid_argument,
  parse_error,
  io_error,
  bad_magic,
  truncated_payload,
  manifest_mismatch,
  numeric_failure,
  empty_result,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

inline const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::dimension_mismatch: return "dimension_mismatch";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::parse_error: return "parse_error";
    case ErrorCode::io_error: return "io_error";
    case ErrorCode::bad_magic: return "bad_magic";
    case ErrorCode::truncated_payload: return "truncated_payload";
    case ErrorCode::manifest_mismatch: return "manifest_mismatch";
    case ErrorCode::numeric_failure: return "numeric_failure";
    case ErrorCode::empty_result: return "empty_result";
  }
  return "unknown";
}

}  // namespace xprot
