#pragma once

#include <stdexcept>
#include <string>

namespace memaudit {

enum class ErrorCode {
  invalid_argument,
  undefined_correlation,
  format,
  unsupported_version,
  empty_set,
  manifest,
  io,
  empty_distribution,
  numerical,
};

const char* to_string(ErrorCode code) noexcept;

/// Every failure raised by the library carries one of the codes above so
/// callers (the CLI in particular) can map it to an exit status.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

}  // namespace memaudit
