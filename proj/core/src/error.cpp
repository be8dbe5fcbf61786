#include "closedobs/error.hpp"

namespace closedobs {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::malformed_input: return "malformed_input";
    case ErrorCode::inconsistent_data: return "inconsistent_data";
    case ErrorCode::io_failure: return "io_failure";
    case ErrorCode::too_short: return "too_short";
    case ErrorCode::eigensolver_failure: return "eigensolver_failure";
    case ErrorCode::extrapolation: return "extrapolation";
    case ErrorCode::duplicate_conflict: return "duplicate_conflict";
    case ErrorCode::singular_system: return "singular_system";
    case ErrorCode::degenerate_coordinates: return "degenerate_coordinates";
    case ErrorCode::version_mismatch: return "version_mismatch";
    case ErrorCode::corrupt_file: return "corrupt_file";
    case ErrorCode::degenerate_fit: return "degenerate_fit";
    }
    return "unknown";
}

} // namespace closedobs
