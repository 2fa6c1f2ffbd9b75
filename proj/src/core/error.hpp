#pragma once

#include <stdexcept>
#include <string>

namespace mutforge {

// Mirrors mf_status in the C API; keep the numeric values in sync.
enum class ErrorCode {
  InvalidArgument = 1,
  Io = 2,
  Parse = 3,
  Config = 4,
  Integrity = 5,
  Stale = 6,
  FixtureInvalid = 7,
  Transport = 8,
  Protocol = 9,
  Undefined = 10,
  Flaky = 11,
  Unclassified = 12,
  Internal = 13,
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mutforge
