#pragma once

#include <stdexcept>
#include <string>

namespace clvshadow {

/// Coarse failure categories. The CLI maps these onto process exit codes,
/// so every throw site picks the category deliberately.
enum class ErrorCode {
    invalid_config,     ///< bad user input: config file, CLI flags, malformed arguments
    divergence,         ///< trajectory left the admissible region (non-finite / bound exceeded)
    growth_overflow,    ///< propagated vector overflowed before renormalization
    singular_jacobian,  ///< map Jacobian not invertible where an inverse was required
    ill_conditioned,    ///< frame matrix condition number above threshold
    not_converged,      ///< iterative pass failed its convergence check
    truncation,         ///< window buffer too small for the requested tolerance
    degenerate_pairing, ///< near-zero pairing where a division by it is required
    property_failure,   ///< a verified property exceeded its threshold
};

const char* to_string(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

    /// "invalid-config: negative horizon" style single-line rendering.
    std::string line() const { return std::string(to_string(code_)) + ": " + what(); }

private:
    ErrorCode code_;
};

struct InvalidConfigError : Error {
    explicit InvalidConfigError(const std::string& w) : Error(ErrorCode::invalid_config, w) {}
};
struct DivergenceError : Error {
    explicit DivergenceError(const std::string& w) : Error(ErrorCode::divergence, w) {}
};
struct GrowthOverflowError : Error {
    explicit GrowthOverflowError(const std::string& w) : Error(ErrorCode::growth_overflow, w) {}
};
struct SingularJacobianError : Error {
    explicit SingularJacobianError(const std::string& w) : Error(ErrorCode::singular_jacobian, w) {}
};
struct IllConditionedError : Error {
    explicit IllConditionedError(const std::string& w) : Error(ErrorCode::ill_conditioned, w) {}
};
struct NotConvergedError : Error {
    explicit NotConvergedError(const std::string& w) : Error(ErrorCode::not_converged, w) {}
};
struct TruncationError : Error {
    explicit TruncationError(const std::string& w) : Error(ErrorCode::truncation, w) {}
};
struct DegeneratePairingError : Error {
    explicit DegeneratePairingError(const std::string& w) : Error(ErrorCode::degenerate_pairing, w) {}
};
struct PropertyFailureError : Error {
    explicit PropertyFailureError(const std::string& w) : Error(ErrorCode::property_failure, w) {}
};

/// Exit code contract used by the CLI: 0 success, 2 invalid config,
/// 3 numerical failure, 4 property failure.
int exit_code_for(ErrorCode code) noexcept;

} // namespace clvshadow
