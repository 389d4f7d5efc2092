#include "clvshadow/adjoint.hpp"

#include <cmath>

#include "clvshadow/detail/steppers.hpp"

namespace clvshadow {

using detail::guard_growth;
using detail::require_range;
using detail::adjoint_transpose_backward;
using detail::adjoint_transpose_forward;
using detail::rk4_adjoint_backward;
using detail::Stages;
using detail::stages_for;

namespace {

Vec zero_like(int m) { return Vec::Zero(m); }

Mat transpose_solve(const Mat& J, const Vec& v, int node) {
    Eigen::PartialPivLU<Mat> lu(J.transpose());
    double det = std::abs(lu.determinant());
    if (!std::isfinite(det) || det < 1e-14)
        throw SingularJacobianError("adjoint_propagate: step Jacobian at node " +
                                    std::to_string(node) + " is not invertible");
    return lu.solve(v);
}

} // namespace

AdjointSolution solve_homogeneous_adjoint(const SystemSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w1) {
    require_range(traj, i0, i1, "solve_homogeneous_adjoint");
    AdjointSolution sol;
    sol.first_index = i0;
    sol.values.assign(i1 - i0 + 1, Vec());
    Vec w = w1;
    sol.values[i1 - i0] = w;
    for (int i = i1 - 1; i >= i0; --i) {
        w = adjoint_transpose_backward(stages_for(spec, traj, i), w);
        guard_growth(w.norm(), "adjoint solution", i);
        sol.values[i - i0] = w;
    }
    return sol;
}

AdjointSolution solve_homogeneous_adjoint(const MapSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w1) {
    require_range(traj, i0, i1, "solve_homogeneous_adjoint");
    AdjointSolution sol;
    sol.first_index = i0;
    sol.values.assign(i1 - i0 + 1, Vec());
    Vec w = w1;
    sol.values[i1 - i0] = w;
    for (int i = i1 - 1; i >= i0; --i) {
        w = spec.step_jac_u(traj.states[i], traj.parameter).transpose() * w;
        guard_growth(w.norm(), "adjoint solution", i);
        sol.values[i - i0] = w;
    }
    return sol;
}

AdjointSolution solve_inhomogeneous_adjoint(const SystemSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& w1,
                                            const std::vector<Vec>& forcing) {
    require_range(traj, i0, i1, "solve_inhomogeneous_adjoint");
    if (static_cast<int>(forcing.size()) < i1 - i0 + 1)
        throw InvalidConfigError("solve_inhomogeneous_adjoint: forcing must cover every node");
    AdjointSolution sol;
    sol.first_index = i0;
    sol.values.assign(i1 - i0 + 1, Vec());
    Vec w = w1;
    sol.values[i1 - i0] = w;
    for (int i = i1 - 1; i >= i0; --i) {
        w = rk4_adjoint_backward(stages_for(spec, traj, i), w,
                                 forcing[i - i0], forcing[i - i0 + 1]);
        guard_growth(w.norm(), "adjoint solution", i);
        sol.values[i - i0] = w;
    }
    return sol;
}

AdjointSolution solve_inhomogeneous_adjoint(const MapSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& w1,
                                            const std::vector<Vec>& forcing) {
    require_range(traj, i0, i1, "solve_inhomogeneous_adjoint");
    if (static_cast<int>(forcing.size()) < i1 - i0)
        throw InvalidConfigError("solve_inhomogeneous_adjoint: forcing must cover every node");
    AdjointSolution sol;
    sol.first_index = i0;
    sol.values.assign(i1 - i0 + 1, Vec());
    Vec w = w1;
    sol.values[i1 - i0] = w;
    for (int i = i1 - 1; i >= i0; --i) {
        w = spec.step_jac_u(traj.states[i], traj.parameter).transpose() * w + forcing[i - i0];
        guard_growth(w.norm(), "adjoint solution", i);
        sol.values[i - i0] = w;
    }
    return sol;
}

Vec adjoint_propagate(const SystemSpec& spec, const Trajectory& traj, int i2, int i1,
                      const Vec& wbar) {
    require_range(traj, std::min(i1, i2), std::max(i1, i2), "adjoint_propagate");
    Vec w = wbar;
    if (i1 <= i2) {
        for (int i = i2 - 1; i >= i1; --i) {
            w = adjoint_transpose_backward(stages_for(spec, traj, i), w);
            guard_growth(w.norm(), "adjoint vector", i);
        }
    } else {
        for (int i = i2; i < i1; ++i) {
            w = adjoint_transpose_forward(stages_for(spec, traj, i), w);
            guard_growth(w.norm(), "adjoint vector", i + 1);
        }
    }
    return w;
}

Vec adjoint_propagate(const MapSpec& spec, const Trajectory& traj, int i2, int i1,
                      const Vec& wbar) {
    require_range(traj, std::min(i1, i2), std::max(i1, i2), "adjoint_propagate");
    Vec w = wbar;
    if (i1 <= i2) {
        for (int i = i2 - 1; i >= i1; --i) {
            w = spec.step_jac_u(traj.states[i], traj.parameter).transpose() * w;
            guard_growth(w.norm(), "adjoint vector", i);
        }
    } else {
        for (int i = i2; i < i1; ++i) {
            w = transpose_solve(spec.step_jac_u(traj.states[i], traj.parameter), w, i);
            guard_growth(w.norm(), "adjoint vector", i + 1);
        }
    }
    return w;
}

namespace {

AdjointClvBasis dual_basis_impl(const ClvBasis& clv,
                                const std::function<Vec(int)>& drift_at_grid) {
    AdjointClvBasis adj;
    const int m = clv.dim();
    const int pts = clv.points();
    adj.frames.resize(pts);
    adj.dual_scale.resize(m, pts);
    adj.neutral_index = clv.neutral_index;
    // Drift pairings only make sense when the basis actually contains a
    // flow-neutral direction; flows without a zero exponent (e.g. near a
    // fixed point) still get a valid dual basis, just no pairing data.
    const bool want_pairing = drift_at_grid && clv.has_zero_exponent;
    if (want_pairing) adj.pairing.resize(pts);

    for (int k = 0; k < pts; ++k) {
        Mat Zinv = clv.frames[k].inverse();
        Mat D(m, m); // columns of Z^{-T} are the rows of Z^{-1}
        for (int j = 0; j < m; ++j) {
            Vec col = Zinv.row(j).transpose();
            double n = col.norm();
            if (!std::isfinite(n) || n == 0.0)
                throw IllConditionedError("dual frame at grid point " + std::to_string(k) +
                                          " is degenerate");
            col /= n;
            if (col.dot(clv.frames[k].col(j)) < 0.0) { col = -col; n = -n; }
            D.col(j) = col;
            adj.dual_scale(j, k) = n;
        }
        adj.frames[k] = D;
        if (want_pairing) {
            if (!clv.neutral_index)
                throw InvalidConfigError("dual_basis: flow basis lacks a neutral direction");
            Vec f = drift_at_grid(k);
            double p = adj.frames[k].col(*clv.neutral_index).dot(f);
            if (std::abs(p) < 1e-6 * f.norm())
                throw DegeneratePairingError(
                    "neutral dual direction nearly orthogonal to the drift at grid point " +
                    std::to_string(k));
            adj.pairing[k] = p;
        }
    }
    return adj;
}

} // namespace

AdjointClvBasis dual_basis(const ClvBasis& clv, const Trajectory& traj, const SystemSpec& spec) {
    const double s = traj.parameter;
    return dual_basis_impl(clv, [&](int k) {
        return spec.drift(traj.states[clv.traj_index(k)], s);
    });
}

AdjointClvBasis dual_basis(const ClvBasis& clv, const Trajectory&, const MapSpec&) {
    return dual_basis_impl(clv, nullptr);
}

Vec adjoint_project(const ClvBasis& clv, int k, const Pick& pick, const Vec& v) {
    if (k < 0 || k >= clv.points())
        throw InvalidConfigError("adjoint_project: grid index out of range");
    const Mat& Z = clv.frames[k];
    Vec coeff = Z.transpose() * v;
    Vec masked = Vec::Zero(v.size());
    for (int j : clv.picked(pick)) masked[j] = coeff[j];
    return Z.transpose().partialPivLu().solve(masked);
}

Vec neutral_project_via_y(const Vec& v, const Vec& f, const Vec& y, double rel_tol) {
    double p = y.dot(f);
    if (std::abs(p) < rel_tol * y.norm() * f.norm())
        throw DegeneratePairingError("neutral pairing <y, f> is numerically zero");
    return (v.dot(f) / p) * y;
}

} // namespace clvshadow
