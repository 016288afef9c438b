#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace vvgen {

/// Failure categories raised by the pipeline. Outcome classifications
/// (parsing error, compile error, ...) are values, never errors.
enum class ErrorCode {
  DuplicateKey,
  NoHeadingsFound,
  OffsetOutOfRange,
  UnknownKey,
  InvalidParams,
  ProviderUnreachable,
  DimsMismatch,
  EmptySelection,
  EmptyContext,
  MissingAsset,
  AuthMissing,
  Exhausted,
  MalformedResponse,
  DanglingPromptId,
  CompilerNotFound,
  SpawnFailure,
  InconsistentInputs,
  NoMatch,
  UnreadableFile,
  IoFailure,
  MissingMetadata,
  InvariantViolation,
  InvalidConfig,
};

std::string_view to_string(ErrorCode code) noexcept;

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

}  // namespace vvgen
