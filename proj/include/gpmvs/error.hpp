#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace gpmvs {

enum class ErrorCode {
  NotARotation,
  InvalidPose,
  InvalidArgument,
  InvalidRange,
  DimensionMismatch,
  FactorizationFailure,
  BatchTooLarge,
  UnsupportedKernel,
  NoValidPixels,
  Io,
  Format,
};

std::string_view to_string(ErrorCode code);

// Every failure raised by the library carries one of the codes above so the
// CLI can report it as a machine-readable JSON object.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace gpmvs
