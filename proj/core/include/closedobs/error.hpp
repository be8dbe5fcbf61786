#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace closedobs {

enum class ErrorCode {
    invalid_argument,
    malformed_input,
    inconsistent_data,
    io_failure,
    too_short,
    eigensolver_failure,
    extrapolation,
    duplicate_conflict,
    singular_system,
    degenerate_coordinates,
    version_mismatch,
    corrupt_file,
    degenerate_fit,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every library failure surfaces as this type; the CLI maps it to a one-line
// "error: <code>: <message>" diagnostic.
class Error : public std::runtime_error {
  public:
    Error(ErrorCode code, const std::string &message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

  private:
    ErrorCode code_;
};

} // namespace closedobs
