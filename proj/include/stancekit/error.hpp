#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace stancekit {

enum class ErrorCode {
  InvalidArgument,
  UnknownLabel,
  MissingBinding,
  ExtraBinding,
  EmptyBinding,
  BackendExhausted,
  BackendError,
  MockMiss,
  MalformedResponse,
  UnparseableAnswer,
  EmptyTrainingSet,
  LabelOutsideClassSet,
  SnapshotBackendMismatch,
  NotSupported,
  Diverged,
  LengthMismatch,
  MissingPrediction,
  ParseError,
  Io,
  Config,
};

// Broad failure class; the CLI maps each onto an exit status.
enum class ErrorCategory { Usage, Data, Backend };

std::string_view code_name(ErrorCode code);
ErrorCategory category_of(ErrorCode code);
std::string_view category_name(ErrorCategory category);

// 1 usage, 2 data/parse, 3 backend/gateway.
int exit_status(ErrorCategory category);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }
  ErrorCategory category() const noexcept { return category_of(code_); }

 private:
  ErrorCode code_;
};

}  // namespace stancekit
