#pragma once

// Internal single-step machinery shared by the tangent and adjoint solvers.
// Not part of the public surface.

#include <cmath>
#include <string>

#include "clvshadow/dynamics.hpp"

namespace clvshadow::detail {

constexpr double kOverflowGuard = 1e250;

/// Frozen-orbit Jacobians at the three RK4 stage times of step i. The
/// midpoint state comes from the cubic Hermite interpolant built on
/// (u_i, f(u_i)) and (u_{i+1}, f(u_{i+1})).
struct Stages {
    Mat A0, Am, A1;
    double h;
};

inline Stages stages_for(const SystemSpec& spec, const Trajectory& traj, int i) {
    const Vec& u0 = traj.states[i];
    const Vec& u1 = traj.states[i + 1];
    const double s = traj.parameter;
    const double h = traj.step;
    Vec f0 = spec.drift(u0, s);
    Vec f1 = spec.drift(u1, s);
    Vec umid = 0.5 * (u0 + u1) + (h / 8.0) * (f0 - f1);
    Stages st;
    st.h = h;
    st.A0 = spec.drift_jac_u(u0, s);
    st.Am = spec.drift_jac_u(umid, s);
    st.A1 = spec.drift_jac_u(u1, s);
    return st;
}

template <typename M>
M rk4_tangent_forward(const Stages& st, const M& w) {
    const double h = st.h;
    M k1 = st.A0 * w;
    M k2 = st.Am * (w + (0.5 * h) * k1);
    M k3 = st.Am * (w + (0.5 * h) * k2);
    M k4 = st.A1 * (w + h * k3);
    return w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

template <typename M>
M rk4_tangent_backward(const Stages& st, const M& w) {
    const double h = st.h; // same equation integrated with step -h
    M k1 = st.A1 * w;
    M k2 = st.Am * (w - (0.5 * h) * k1);
    M k3 = st.Am * (w - (0.5 * h) * k2);
    M k4 = st.A0 * (w - h * k3);
    return w - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

inline Vec rk4_tangent_forced(const Stages& st, const Vec& v, const Vec& g0, const Vec& g1) {
    const double h = st.h;
    Vec gm = 0.5 * (g0 + g1);
    Vec k1 = st.A0 * v + g0;
    Vec k2 = st.Am * (v + (0.5 * h) * k1) + gm;
    Vec k3 = st.Am * (v + (0.5 * h) * k2) + gm;
    Vec k4 = st.A1 * (v + h * k3) + g1;
    return v + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Backward step of dw/dt = -A(t)^T w + g(t) from node i+1 to node i.
inline Vec rk4_adjoint_backward(const Stages& st, const Vec& w, const Vec& g0, const Vec& g1) {
    const double h = st.h;
    Vec gm = 0.5 * (g0 + g1);
    Vec k1 = -st.A1.transpose() * w + g1;
    Vec k2 = -st.Am.transpose() * (w - (0.5 * h) * k1) + gm;
    Vec k3 = -st.Am.transpose() * (w - (0.5 * h) * k2) + gm;
    Vec k4 = -st.A0.transpose() * (w - h * k3) + g0;
    return w - (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// One-step tangent matrix of step i; its transpose is the exact discrete
/// adjoint of that step, so homogeneous adjoint propagation built from it
/// preserves tangent/adjoint pairings to roundoff.
inline Mat tangent_matrix(const Stages& st) {
    const int m = static_cast<int>(st.A0.rows());
    return rk4_tangent_forward(st, Mat(Mat::Identity(m, m)));
}

/// Homogeneous adjoint step from node i+1 to node i: w_i = S_i^T w_{i+1}.
inline Vec adjoint_transpose_backward(const Stages& st, const Vec& w) {
    return tangent_matrix(st).transpose() * w;
}

/// Homogeneous adjoint step from node i to node i+1: w_{i+1} = S_i^{-T} w_i.
inline Vec adjoint_transpose_forward(const Stages& st, const Vec& w) {
    return Eigen::PartialPivLU<Mat>(tangent_matrix(st).transpose()).solve(w);
}

inline void guard_growth(double norm, const char* what, int index) {
    if (!std::isfinite(norm) || norm > kOverflowGuard)
        throw GrowthOverflowError(std::string(what) + " overflowed at node " +
                                  std::to_string(index) +
                                  "; renormalize more often or shorten the span");
}

inline void require_range(const Trajectory& traj, int i0, int i1, const char* what) {
    if (i0 < 0 || i1 > traj.steps() || i0 > i1)
        throw InvalidConfigError(std::string(what) + ": node range [" + std::to_string(i0) +
                                 ", " + std::to_string(i1) + "] outside trajectory");
}

} // namespace clvshadow::detail
