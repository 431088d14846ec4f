#pragma once

#include <stdexcept>
#include <string>

namespace certiprob {

enum class ErrorCode {
  kInvalidArgument = 1,
  kShapeMismatch,
  kIo,
  kFormat,
  kConfig,
  kNumeric,
  kState,
};

/// Base exception for the library. The code maps one-to-one onto the C API
/// status values.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
  if (!cond) throw Error(code, what);
}

}  // namespace certiprob
