#pragma once

#include <stdexcept>
#include <string>

namespace goldmine {

/// Failure categories. Each maps onto a process exit code in the CLI.
enum class ErrorCode {
  config,                // invalid parameters or configuration (exit 2)
  data,                  // corrupt, incompatible or incomplete data (exit 3)
  numeric,               // non-finite values, degenerate probabilities (exit 4)
  not_found,             // a named input file does not exist (exit 5)
  unsupported,           // operation not available for this simulator (exit 2)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return 2;
    case ErrorCode::unsupported: return 2;
    case ErrorCode::data: return 3;
    case ErrorCode::numeric: return 4;
    case ErrorCode::not_found: return 5;
  }
  return 1;
}

}  // namespace goldmine
