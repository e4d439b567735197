#pragma once

#include <stdexcept>
#include <string>

namespace pmvc {

// Failure categories; the CLI maps each to its own exit code.
enum class ErrorKind {
  kUsage = 2,
  kIo = 3,
  kFormat = 4,          // malformed bitstream/checkpoint/config
  kModelMismatch = 5,   // hash or shape disagreement between stream and model
  kContract = 6,        // NaN/Inf, range violations, internal invariants
  kDimension = 7,       // bad frame geometry, shape mismatches at the API edge
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind k, const std::string& msg) {
  throw Error(k, msg);
}

inline void require(bool ok, ErrorKind k, const std::string& msg) {
  if (!ok) fail(k, msg);
}

}  // namespace pmvc
