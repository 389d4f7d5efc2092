#pragma once

#include "clvshadow/shadowing.hpp"

#include <cstdint>
#include <string>

namespace clvshadow {

/// Estimate of d<J>/ds with a crude spread measure.
///
/// `stderr_est` splits the quadrature window into ten equal segments and
/// reports the standard error of the segment means; it gauges sampling noise,
/// not discretization bias. `horizon` is the averaging span the value was
/// taken over (time for flows, steps for maps).
struct SensitivityResult {
    std::string method;
    double value = 0.0;
    double stderr_est = 0.0;
    double horizon = 0.0;
};

/// Sensitivity from the tangent shadowing direction:
/// time average of <J_u, v> + eta * (J - <J>) + J_s over the window.
SensitivityResult sensitivity_tangent_flow(const SystemSpec& spec, const Trajectory& traj,
                                           const ClvBasis& clv, const TangentShadowing& shadow);

/// Sensitivity from the adjoint shadowing direction:
/// time average of <v_bar, f_s> + J_s over the window.
SensitivityResult sensitivity_adjoint_flow(const SystemSpec& spec, const Trajectory& traj,
                                           const ClvBasis& clv, const AdjointShadowing& shadow);

/// Map analogues. The tangent form averages <J_u(u_i), v_i> + J_s(u_i);
/// the adjoint form averages <v_bar_{i+1}, f_s(u_i)> + J_s(u_i). Both run the
/// step index over the window minus its last point, which makes the two
/// estimates transposes of the same double sum when the window is untrimmed.
SensitivityResult sensitivity_tangent_map(const MapSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const MapShadowing& shadow);
SensitivityResult sensitivity_adjoint_map(const MapSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const MapShadowing& shadow);

/// Ensemble central-difference reference for d<J>/ds. Deliberately
/// independent of every covariant/shadowing code path.
struct FdOptions {
    double ds = 0.0;      ///< parameter offset; entry default when 0
    double horizon = 0.0; ///< averaging span per member (time / steps), required
    double spinup = -1.0; ///< pre-average transient; entry default when negative
    double step = 0.0;    ///< integrator step for flows; entry default when 0
    int ensemble = 10;    ///< number of independent members
    std::uint64_t seed = 20177;
};

/// Each member draws one initial state from the entry's box and uses it for
/// both s-ds and s+ds runs, so the quoted stderr is of paired differences.
SensitivityResult finite_difference_oracle(const FlowEntry& entry, double s, FdOptions opts);
SensitivityResult finite_difference_oracle(const MapEntry& entry, double s, FdOptions opts);

} // namespace clvshadow
