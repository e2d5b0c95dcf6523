#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace raisdr {

/// Every failure the library reports carries one of these codes. The names
/// double as the machine-readable `error` field of service replies.
enum class ErrorCode {
  UnsupportedGrade,
  NoFundusDetected,
  InvalidImage,
  DecodeError,
  MissingPrediction,
  BackendUnavailable,
  InvalidOutput,
  ParseError,
  DuplicateKey,
  InvalidPolicy,
  SchemaError,
  DuplicateImage,
  OrphanImage,
  ValueError,
  InvalidParams,
  EmptyInput,
  EmptyMatrix,
  DegenerateLabels,
  EmptyGroup,
  UnknownStudy,
  StudyClosed,
  UnknownImage,
  InvalidState,
  IoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace raisdr
