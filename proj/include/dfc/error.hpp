#pragma once

#include <stdexcept>
#include <string>

namespace dfc {

enum class ErrorCode {
  kInvalidArgument = 1,  // contract violation by the caller
  kNotFound = 2,         // missing prerequisite file
  kFormat = 3,           // malformed file or config
  kInternal = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& what) {
  throw Error(code, what);
}

inline void require(bool cond, const std::string& what) {
  if (!cond) fail(ErrorCode::kInvalidArgument, what);
}

}  // namespace dfc
