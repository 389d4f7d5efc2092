#pragma once

#include "clvshadow/adjoint.hpp"

namespace clvshadow {

struct ShadowingOptions {
    /// Grid intervals trimmed from each end of the covariant window before
    /// reporting values. 0 keeps the whole window (the finite-window form,
    /// which makes the tangent/adjoint pairing identity exact); -1 sizes the
    /// trim so truncated tails contribute below 1e-8 relatively.
    int buffer = -1;
    /// Largest admissible truncated-tail weight exp(-rate * buffer * dt)
    /// when buffer > 0.
    double truncation_tol = 1e-6;
};

/// Measured properties of a shadowing direction; filled by verify_properties.
struct ShadowingDiagnostics {
    double residual = 0.0;          ///< max equation residual over the window
    double residual_scale = 0.0;    ///< discretization scale the residual is judged against
    double unstable_at_start = 0.0; ///< relative expanding adjoint content at the window start
    double sup_norm = 0.0;
    double growth_ratio = 0.0;      ///< sup over last quarter / sup over first quarter
    double f_pairing_avg = 0.0;     ///< flows: |window mean <v, f>| / (sup|v| sup|f|)
    double f_pairing_pm_max = 0.0;  ///< flows: max pointwise |<v_pm, f>| / (|v_pm||f|)
};

/// Tangent shadowing direction of a flow on grid points
/// first_grid .. first_grid + v.size() - 1 of the covariant window, split as
/// the non-neutral part v and the time-dilation density eta.
struct TangentShadowing {
    int first_grid = 0;
    double grid_dt = 0.0;
    std::vector<Vec> v; ///< hyperbolic (non-neutral) component
    Vec eta;            ///< neutral component expressed as a time dilation
    double j_mean = 0.0; ///< full-trajectory objective average

    int points() const { return static_cast<int>(v.size()); }
};

/// Adjoint shadowing direction of a flow: v = v_pm + v_zero with v_pm free of
/// neutral content and v_zero carried by the neutral dual direction.
struct AdjointShadowing {
    int first_grid = 0;
    double grid_dt = 0.0;
    std::vector<Vec> v;
    std::vector<Vec> v_pm;
    std::vector<Vec> v_zero;
    double j_mean = 0.0;
    ShadowingDiagnostics diagnostics;

    int points() const { return static_cast<int>(v.size()); }
};

/// Map analogue; tangent and adjoint sequences are filled by their
/// respective constructions (the other stays empty).
struct MapShadowing {
    int first_grid = 0;
    std::vector<Vec> v;     ///< tangent sequence v_i
    std::vector<Vec> v_bar; ///< adjoint sequence v_bar_l
    double j_mean = 0.0;
    ShadowingDiagnostics diagnostics;

    int points() const { return static_cast<int>(std::max(v.size(), v_bar.size())); }
};

/// Build the tangent shadowing direction by accumulating the parameter
/// forcing in covariant coordinates: contracting content integrates forward,
/// expanding content integrates backward, neutral content becomes eta.
TangentShadowing tangent_shadowing_flow(const SystemSpec& spec, const Trajectory& traj,
                                        const ClvBasis& clv, const ShadowingOptions& opts = {});

/// Adjoint counterpart driven by the objective gradient in dual coordinates;
/// diagnostics are verified on construction.
AdjointShadowing adjoint_shadowing_flow(const SystemSpec& spec, const Trajectory& traj,
                                        const ClvBasis& clv, const AdjointClvBasis& adj,
                                        const ShadowingOptions& opts = {});

MapShadowing tangent_shadowing_map(const MapSpec& spec, const Trajectory& traj,
                                   const ClvBasis& clv, const ShadowingOptions& opts = {});
MapShadowing adjoint_shadowing_map(const MapSpec& spec, const Trajectory& traj,
                                   const ClvBasis& clv, const ShadowingOptions& opts = {});

/// Re-measure the defining properties of an adjoint shadowing direction:
/// equation residual, expanding content at the window start, boundedness,
/// and (flows) orthogonality to the drift on average and pointwise for the
/// hyperbolic part.
ShadowingDiagnostics verify_properties(const SystemSpec& spec, const Trajectory& traj,
                                       const ClvBasis& clv, const AdjointShadowing& shadow);
ShadowingDiagnostics verify_properties(const MapSpec& spec, const Trajectory& traj,
                                       const ClvBasis& clv, const MapShadowing& shadow);

/// Add eps times a homogeneous adjoint solution along the leading expanding
/// dual direction, scaled to unit norm at the window end. A correct
/// uniqueness diagnostic must flag the window start afterwards while
/// residual-style checks stay clean. Throws GrowthOverflowError when the
/// window is too long for the backward amplification to be representable.
void inject_unstable_fault(AdjointShadowing& shadow, const ClvBasis& clv,
                           const AdjointClvBasis& adj, double eps);

/// Map version: corrupt only the window-start value. Pairing sums never read
/// it, so identity checks stay exact while the start diagnostic trips.
void inject_unstable_fault(MapShadowing& shadow, const ClvBasis& clv,
                           const AdjointClvBasis& adj, double eps);

} // namespace clvshadow
