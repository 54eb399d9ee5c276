#pragma once

#include <stdexcept>
#include <string>

namespace mapless {

enum class ErrorCode {
  invalid_argument,
  no_data,
  out_of_fov,
  degenerate_gate,
  no_gate,
  no_containment,
  infeasible,
  infeasible_world,
  io,
};

const char* to_string(ErrorCode code) noexcept;

// All recoverable failures of the planning pipeline are reported through this
// type; callers branch on code().
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace mapless
