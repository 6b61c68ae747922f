#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfld {

enum class ErrorCode {
  Io = 1,
  BadMagic,
  Truncated,
  ManifestMismatch,
  InvalidStore,
  UnknownKey,
  UnknownLayer,
  TooFewManifolds,
  InvalidArgument,
  NotBracketable,
  NoRecords,
  Numerical,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the core carries one of the codes above; the C API
// maps them onto mfld_status values one to one.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

inline void require(bool cond, ErrorCode code, const std::string& message) {
  if (!cond) fail(code, message);
}

}  // namespace mfld
