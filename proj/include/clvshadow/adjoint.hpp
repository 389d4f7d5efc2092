#pragma once

#include <vector>

#include "clvshadow/tangent.hpp"

namespace clvshadow {

/// Values of an adjoint solution at trajectory nodes
/// first_index .. first_index + values.size() - 1; computed backward from a
/// terminal condition but stored in forward node order.
struct AdjointSolution {
    int first_index = 0;
    std::vector<Vec> values;

    const Vec& at(int traj_index) const { return values.at(traj_index - first_index); }
    int last_index() const { return first_index + static_cast<int>(values.size()) - 1; }
};

/// Solve dw/dt = -f_u^T w (flows) backward from node i1 to node i0, or the
/// map recursion w_l = f_u(u_l)^T w_{l+1}, starting from terminal value w1.
/// Flow steps are the exact transposes of the tangent steps, so the pairing
/// of a homogeneous adjoint solution with any tangent solution is constant
/// to roundoff, not just to integrator order.
AdjointSolution solve_homogeneous_adjoint(const SystemSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w1);
AdjointSolution solve_homogeneous_adjoint(const MapSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w1);

/// Forced variants of the backward solves: dw/dt = -f_u^T w + g(t) with g
/// given at nodes (forcing[k] is g at node i0 + k), or
/// w_l = f_u(u_l)^T w_{l+1} + g_l for maps (forcing[k] consumed at node i0+k).
AdjointSolution solve_inhomogeneous_adjoint(const SystemSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& w1,
                                            const std::vector<Vec>& forcing);
AdjointSolution solve_inhomogeneous_adjoint(const MapSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& w1,
                                            const std::vector<Vec>& forcing);

/// Apply the adjoint flow operator taking a covector at node i2 to node i1.
/// i1 < i2 is the natural (backward) direction; i1 > i2 inverts it, which for
/// maps requires invertible step Jacobians.
Vec adjoint_propagate(const SystemSpec& spec, const Trajectory& traj, int i2, int i1,
                      const Vec& wbar);
Vec adjoint_propagate(const MapSpec& spec, const Trajectory& traj, int i2, int i1,
                      const Vec& wbar);

/// Unit-column dual frames along a covariant basis window. Column j of
/// frames[k] pairs to 1/dual_scale(j,k) with direction j of the tangent
/// frame and to 0 with every other direction.
struct AdjointClvBasis {
    std::vector<Mat> frames; ///< unit columns, same direction order as the tangent frames
    Mat dual_scale;          ///< m x points; norm removed from each raw dual column
    Vec pairing;             ///< flows: <y(k), f(u_k)> per grid point (empty for maps)
    std::optional<int> neutral_index;

    int points() const { return static_cast<int>(frames.size()); }

    /// Neutral dual direction at grid point k (flows only).
    Vec y(int k) const {
        if (!neutral_index)
            throw InvalidConfigError("adjoint basis has no neutral direction (map system)");
        return frames.at(k).col(*neutral_index);
    }
};

/// Invert the tangent frames column by column. Flows whose basis carries a
/// zero exponent also record the pairing of the neutral dual direction with
/// the drift and reject orbits where it degenerates (DegeneratePairingError
/// below 1e-6 relative); other systems get frames only.
AdjointClvBasis dual_basis(const ClvBasis& clv, const Trajectory& traj, const SystemSpec& spec);
AdjointClvBasis dual_basis(const ClvBasis& clv, const Trajectory& traj, const MapSpec& spec);

/// Adjoint oblique projection at grid point k: transpose of project() with
/// the same selection, evaluated as Z^{-T} D Z^T v.
Vec adjoint_project(const ClvBasis& clv, int k, const Pick& pick, const Vec& v);

/// Neutral adjoint projection <v, f> y / <y, f> without frame inversion.
/// Throws DegeneratePairingError when |<y, f>| < rel_tol * |y| |f|.
Vec neutral_project_via_y(const Vec& v, const Vec& f, const Vec& y, double rel_tol = 1e-6);

} // namespace clvshadow
