#include "raisdr/error.hpp"

namespace raisdr {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnsupportedGrade: return "UnsupportedGrade";
    case ErrorCode::NoFundusDetected: return "NoFundusDetected";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::DecodeError: return "DecodeError";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::InvalidOutput: return "InvalidOutput";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::DuplicateKey: return "DuplicateKey";
    case ErrorCode::InvalidPolicy: return "InvalidPolicy";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::DuplicateImage: return "DuplicateImage";
    case ErrorCode::OrphanImage: return "OrphanImage";
    case ErrorCode::ValueError: return "ValueError";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::EmptyMatrix: return "EmptyMatrix";
    case ErrorCode::DegenerateLabels: return "DegenerateLabels";
    case ErrorCode::EmptyGroup: return "EmptyGroup";
    case ErrorCode::UnknownStudy: return "UnknownStudy";
    case ErrorCode::StudyClosed: return "StudyClosed";
    case ErrorCode::UnknownImage: return "UnknownImage";
    case ErrorCode::InvalidState: return "InvalidState";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace raisdr
