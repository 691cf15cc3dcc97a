#include "stancekit/error.hpp"

namespace stancekit {

std::string_view code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::UnknownLabel: return "UnknownLabel";
    case ErrorCode::MissingBinding: return "MissingBinding";
    case ErrorCode::ExtraBinding: return "ExtraBinding";
    case ErrorCode::EmptyBinding: return "EmptyBinding";
    case ErrorCode::BackendExhausted: return "BackendExhausted";
    case ErrorCode::BackendError: return "BackendError";
    case ErrorCode::MockMiss: return "MockMiss";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::UnparseableAnswer: return "UnparseableAnswer";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::LabelOutsideClassSet: return "LabelOutsideClassSet";
    case ErrorCode::SnapshotBackendMismatch: return "SnapshotBackendMismatch";
    case ErrorCode::NotSupported: return "NotSupported";
    case ErrorCode::Diverged: return "Diverged";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::MissingPrediction: return "MissingPrediction";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::Io: return "Io";
    case ErrorCode::Config: return "Config";
  }
  return "Unknown";
}

ErrorCategory category_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument:
    case ErrorCode::Config:
    case ErrorCode::NotSupported:
      return ErrorCategory::Usage;
    case ErrorCode::BackendExhausted:
    case ErrorCode::BackendError:
    case ErrorCode::MockMiss:
      return ErrorCategory::Backend;
    default:
      return ErrorCategory::Data;
  }
}

std::string_view category_name(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Backend: return "backend";
  }
  return "unknown";
}

int exit_status(ErrorCategory category) {
  switch (category) {
    case ErrorCategory::Usage: return 1;
    case ErrorCategory::Data: return 2;
    case ErrorCategory::Backend: return 3;
  }
  return 1;
}

}  // namespace stancekit
