#pragma once
/// @file errors.hpp
/// @brief Typed error hierarchy with stable numeric codes reused as CLI exit
///        status: 1 validation, 2 numerical, 3 non-convergence.

#include <stdexcept>
#include <string>

namespace tmm {

enum class ErrorCode : int {
  validation = 1,      ///< bad inputs, malformed configs, constraint violations
  numerical = 2,       ///< non-positive-definite matrices, factorization failures
  nonconvergence = 3,  ///< iteration budget exhausted without meeting tolerances
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] inline void fail_validation(const std::string& message) {
  throw Error(ErrorCode::validation, message);
}

[[noreturn]] inline void fail_numerical(const std::string& message) {
  throw Error(ErrorCode::numerical, message);
}

[[noreturn]] inline void fail_nonconvergence(const std::string& message) {
  throw Error(ErrorCode::nonconvergence, message);
}

}  // namespace tmm
