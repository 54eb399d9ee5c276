#include "mapless/error.hpp"

namespace mapless {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::no_data: return "no_data";
    case ErrorCode::out_of_fov: return "out_of_fov";
    case ErrorCode::degenerate_gate: return "degenerate_gate";
    case ErrorCode::no_gate: return "no_gate";
    case ErrorCode::no_containment: return "no_containment";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::infeasible_world: return "infeasible_world";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace mapless
