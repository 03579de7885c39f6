#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace evontree {

enum class ErrorCode {
  EmptyLabel,
  InvalidParams,
  Transport,
  Protocol,
  EmptySpan,
  UnrecognizedPrompt,
  ParseFailure,
  SchemaMismatch,
  MissingThreshold,
  DegenerateLabels,
  Unparseable,
  InvalidHops,
  MissingUpstream,
  ConfigInvalid,
  JudgeUnavailable,
  Io,
};

std::string_view to_string(ErrorCode code);

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Transport failures remember how many attempts were made before giving up.
class TransportError : public Error {
 public:
  TransportError(const std::string& message, int attempts)
      : Error(ErrorCode::Transport, message + " (after " + std::to_string(attempts) + " attempts)"),
        attempts_(attempts) {}

  int attempts() const noexcept { return attempts_; }

 private:
  int attempts_;
};

}  // namespace evontree
