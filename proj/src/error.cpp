#include "pcar/error.hpp"

namespace pcar {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::InvalidArm: return "invalid-arm";
        case ErrorKind::Parse: return "parse-error";
        case ErrorKind::SchemaViolation: return "schema-violation";
        case ErrorKind::GuardExceeded: return "guard-exceeded";
        case ErrorKind::Degenerate: return "degenerate-input";
        case ErrorKind::Io: return "io-error";
        case ErrorKind::Config: return "config-error";
    }
    return "unknown";
}

}  // namespace pcar
