#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace fmlab {

// Every rejection in the library carries one of these codes so callers (and
// the CLI exit-status mapping) can tell input problems apart.
enum class ErrorCode {
    InvalidArgument,
    NonFinite,
    SpecMismatch,
    OutOfRange,
    BudgetExceeded,
    Divergent,
    BadMagic,
    Truncated,
    NonPowerOfTwo,
    IoFailure,
    UnknownName,
    ConfigInvalid,
};

inline std::string_view to_string(ErrorCode code) {
    switch (code) {
        case ErrorCode::InvalidArgument: return "invalid-argument";
        case ErrorCode::NonFinite: return "non-finite";
        case ErrorCode::SpecMismatch: return "spec-mismatch";
        case ErrorCode::OutOfRange: return "out-of-range";
        case ErrorCode::BudgetExceeded: return "budget-exceeded";
        case ErrorCode::Divergent: return "divergent";
        case ErrorCode::BadMagic: return "bad-magic";
        case ErrorCode::Truncated: return "truncated";
        case ErrorCode::NonPowerOfTwo: return "non-power-of-two";
        case ErrorCode::IoFailure: return "io-failure";
        case ErrorCode::UnknownName: return "unknown-name";
        case ErrorCode::ConfigInvalid: return "config-invalid";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, ErrorCode code, const std::string& what) {
    if (!condition) {
        throw Error(code, what);
    }
}

}  // namespace fmlab
