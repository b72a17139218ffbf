#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace safeqa {

enum class ErrorCode {
  kInvalidArgument,
  kPrecondition,
  kNotFound,
  kConflict,
  kDuplicate,
  kIo,
  kParse,
  kInvariant,
  kProviderUnavailable,
  kProviderRejected,
  kRailRejected,
  kNotInitialized,
};

std::string_view to_string(ErrorCode code);

/// Domain error carried through every module. Callers at the edges (service,
/// cli) translate the code into HTTP statuses or exit codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Raised by provider adapters. Retriable failures (timeouts, 5xx) are
/// retried by the shared retry policy; others surface immediately.
class ProviderError : public Error {
 public:
  ProviderError(const std::string& message, bool retriable)
      : Error(retriable ? ErrorCode::kProviderUnavailable
                        : ErrorCode::kProviderRejected,
              message),
        retriable_(retriable) {}

  bool retriable() const noexcept { return retriable_; }

 private:
  bool retriable_;
};

}  // namespace safeqa
