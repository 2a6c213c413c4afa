#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace pcar {

enum class ErrorKind {
    InvalidParameter,
    InvalidArm,
    Parse,
    SchemaViolation,
    GuardExceeded,
    Degenerate,
    Io,
    Config,
};

std::string_view to_string(ErrorKind kind);

// Every failure raised by the library carries a kind so the CLI can emit a
// machine-readable error line.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace pcar
