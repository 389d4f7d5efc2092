#include "clvshadow/errors.hpp"

namespace clvshadow {

const char* to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_config: return "invalid-config";
        case ErrorCode::divergence: return "divergence";
        case ErrorCode::growth_overflow: return "growth-overflow";
        case ErrorCode::singular_jacobian: return "singular-jacobian";
        case ErrorCode::ill_conditioned: return "ill-conditioned";
        case ErrorCode::not_converged: return "not-converged";
        case ErrorCode::truncation: return "truncation";
        case ErrorCode::degenerate_pairing: return "degenerate-pairing";
        case ErrorCode::property_failure: return "property-failure";
    }
    return "unknown";
}

int exit_code_for(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::invalid_config: return 2;
        case ErrorCode::property_failure: return 4;
        default: return 3;
    }
}

} // namespace clvshadow
