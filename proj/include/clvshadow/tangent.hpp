#pragma once

#include <optional>
#include <vector>

#include "clvshadow/dynamics.hpp"

namespace clvshadow {

/// Values of a tangent (or adjoint) solution at trajectory nodes
/// first_index .. first_index + values.size() - 1.
struct TangentSolution {
    int first_index = 0;
    std::vector<Vec> values;

    const Vec& at(int traj_index) const { return values.at(traj_index - first_index); }
    int last_index() const { return first_index + static_cast<int>(values.size()) - 1; }
};

/// One-step tangent propagator along a stored orbit. Flows: RK4 applied to
/// dw/dt = f_u(u(t)) w with the orbit interpolated cubically at stage points;
/// maps: the step Jacobian itself.
Mat tangent_step_matrix(const SystemSpec& spec, const Trajectory& traj, int i);
Mat tangent_step_matrix(const MapSpec& spec, const Trajectory& traj, int i);

/// Solve dw/dt = f_u w (flows) or w_{i+1} = f_u(u_i) w_i (maps) from node i0
/// to node i1 >= i0 starting at w0. Norm overflow raises GrowthOverflowError.
TangentSolution solve_homogeneous_tangent(const SystemSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w0);
TangentSolution solve_homogeneous_tangent(const MapSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w0);

/// Forced variants: dv/dt = f_u v + g(t) with g given at nodes (linearly
/// interpolated at stage midpoints), or v_{i+1} = f_u v_i + g_i for maps.
/// forcing[k] is g at node i0 + k; maps consume forcing[k] on step i0+k.
TangentSolution solve_inhomogeneous_tangent(const SystemSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& v0,
                                            const std::vector<Vec>& forcing);
TangentSolution solve_inhomogeneous_tangent(const MapSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& v0,
                                            const std::vector<Vec>& forcing);

/// Apply the tangent flow operator from node i1 to node i2 (either order).
/// Backward application for flows integrates the same equation in reverse;
/// for maps it solves with the step Jacobian (SingularJacobianError if the
/// Jacobian is not invertible).
Vec propagate(const SystemSpec& spec, const Trajectory& traj, int i1, int i2, const Vec& w);
Vec propagate(const MapSpec& spec, const Trajectory& traj, int i1, int i2, const Vec& w);

/// Which covariant directions a projection keeps.
struct Pick {
    enum class Kind { single, plus, minus, zero, plus_minus };
    Kind kind = Kind::plus;
    int index = -1; ///< used by Kind::single

    static Pick single(int j) { return {Kind::single, j}; }
    static Pick plus() { return {Kind::plus, -1}; }
    static Pick minus() { return {Kind::minus, -1}; }
    static Pick zero() { return {Kind::zero, -1}; }
    static Pick plus_minus() { return {Kind::plus_minus, -1}; }
};

struct ClvOptions {
    int qr_stride = 0;               ///< 0 = auto (10 for flows, 1 for maps)
    double transient_fraction = 0.2; ///< per-side fraction of grid discarded
    double neutral_tolerance = 0.0;  ///< 0 = auto: max(1e-3, 0.005 * exponent spread)
    std::uint64_t seed = 0x5eed0c1117ULL; ///< seeds random frame initializations
    double convergence_tol = 1e-7;   ///< max angle between two backward passes
    double condition_limit = 1e8;    ///< frame condition number guard
};

/// Covariant basis along the converged interior window of an orbit.
/// Grid point k corresponds to trajectory node first_step + k * stride.
struct ClvBasis {
    int stride = 1;
    int first_step = 0;
    double grid_dt = 0.0;          ///< time between grid points
    std::vector<Mat> frames;       ///< unit-column frames Z_k, exponent-sorted
    Mat log_growth;                ///< m x (points-1); column growth over interval k
    Vec exponents;                 ///< per-direction averages, sorted descending
    int n_unstable = 0;            ///< exponents above neutral tolerance (flows: excluding neutral)
    std::optional<int> neutral_index; ///< flows: direction nearest zero exponent
    bool has_zero_exponent = false;   ///< |exponent[neutral_index]| within tolerance
    double neutral_tolerance = 0.0;
    double min_angle = 0.0;        ///< min angle between any direction and span of the rest

    int points() const { return static_cast<int>(frames.size()); }
    int dim() const { return frames.empty() ? 0 : static_cast<int>(frames[0].rows()); }
    int traj_index(int k) const { return first_step + k * stride; }
    double growth_factor(int j, int k) const { return std::exp(log_growth(j, k)); }

    /// Indices kept by a selection. Flows: zero = {neutral}, plus/minus are
    /// the expanding/contracting directions excluding the neutral one.
    std::vector<int> picked(const Pick& pick) const;

    /// Writes <prefix>.meta.json and <prefix>.frames.bin.
    void save(const std::string& prefix) const;
    static ClvBasis load(const std::string& prefix);
};

/// Two-pass covariant-vector computation: a forward orthonormalization pass
/// stores triangular factors, a backward normalized coefficient pass makes
/// the frames covariant. A second backward pass from an independent random
/// start validates convergence (NotConvergedError on disagreement).
ClvBasis compute_clvs(const SystemSpec& spec, const Trajectory& traj, const ClvOptions& opts = {});
ClvBasis compute_clvs(const MapSpec& spec, const Trajectory& traj, const ClvOptions& opts = {});

/// Oblique projection onto the picked directions at grid point k:
/// expand v in the frame, zero the complement, map back.
Vec project(const ClvBasis& clv, int k, const Pick& pick, const Vec& v);

} // namespace clvshadow
