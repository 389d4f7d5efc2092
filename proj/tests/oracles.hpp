#pragma once

// Independent reference implementations used only by tests. Everything here
// deliberately avoids the library's tangent/adjoint/CLV code paths so that
// agreement between the two is meaningful evidence, not a tautology.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "clvshadow/dynamics.hpp"

namespace oracle {

using clvshadow::Mat;
using clvshadow::MapSpec;
using clvshadow::SystemSpec;
using clvshadow::Vec;

inline Vec vec2(double a, double b) {
    Vec v(2);
    v << a, b;
    return v;
}

inline Vec vec3(double a, double b, double c) {
    Vec v(3);
    v << a, b, c;
    return v;
}

// ---------------------------------------------------------------------------
// Cat map closed forms. M = [[2,1],[1,1]] is symmetric, so its eigenvectors
// are orthogonal and the oblique spectral projectors coincide with the
// orthogonal ones.
// ---------------------------------------------------------------------------

struct CatMap {
    Mat M = (Mat(2, 2) << 2.0, 1.0, 1.0, 1.0).finished();
    Mat Minv = (Mat(2, 2) << 1.0, -1.0, -1.0, 2.0).finished(); // det M = 1
    double lam_plus = (3.0 + std::sqrt(5.0)) / 2.0;
    double lam_minus = (3.0 - std::sqrt(5.0)) / 2.0;
    double exponent = std::log((3.0 + std::sqrt(5.0)) / 2.0); // 0.9624236501...
    Vec e_u, e_s;
    Mat Pu, Ps;

    CatMap() {
        const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
        e_u = vec2(phi, 1.0) / std::sqrt(1.0 + phi * phi);
        e_s = vec2(1.0, -phi) / std::sqrt(1.0 + phi * phi);
        Pu = e_u * e_u.transpose();
        Ps = e_s * e_s.transpose();
    }

    /// d<J>/ds at s=0 for the registered perturbation/objective pair. Only
    /// the one-step correlation of cos(2pi(u1+u2)) with itself survives the
    /// wavevector matching, leaving e_s[1]/4.
    double sensitivity_at_zero() const { return e_s[1] / 4.0; }

    /// M^n for n >= 0, M^{-|n|} for n < 0; entries stay exact integers for
    /// |n| <= 35 in double precision.
    Mat power(int n) const {
        Mat base = n >= 0 ? M : Minv;
        Mat acc = Mat::Identity(2, 2);
        for (int k = 0; k < std::abs(n); ++k) acc = base * acc;
        return acc;
    }
};

// ---------------------------------------------------------------------------
// Independent Lyapunov-exponent reference (QR renormalization). Flows
// integrate the augmented system (u, W) with one RK4 whose Jacobian is
// evaluated at the RK4 stage states — a different discretization from the
// library's frozen-orbit interpolated stepper.
// ---------------------------------------------------------------------------

inline Vec benettin_exponents_flow(const SystemSpec& spec, Vec u, double s, double h,
                                   int n, int renorm_stride = 10) {
    const int m = spec.dim;
    Mat W = Mat::Identity(m, m);
    Vec sums = Vec::Zero(m);
    double time = 0.0;

    auto fu = [&](const Vec& x) { return spec.drift_jac_u(x, s); };
    for (int i = 0; i < n; ++i) {
        Vec k1 = spec.drift(u, s);
        Mat K1 = fu(u) * W;
        Vec u2 = u + 0.5 * h * k1;
        Vec k2 = spec.drift(u2, s);
        Mat K2 = fu(u2) * (W + 0.5 * h * K1);
        Vec u3 = u + 0.5 * h * k2;
        Vec k3 = spec.drift(u3, s);
        Mat K3 = fu(u3) * (W + 0.5 * h * K2);
        Vec u4 = u + h * k3;
        Vec k4 = spec.drift(u4, s);
        Mat K4 = fu(u4) * (W + h * K3);
        u += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        W += (h / 6.0) * (K1 + 2.0 * K2 + 2.0 * K3 + K4);
        if ((i + 1) % renorm_stride == 0 || i + 1 == n) {
            Eigen::HouseholderQR<Mat> qr(W);
            Mat Q = qr.householderQ() * Mat::Identity(m, m);
            Mat R = Q.transpose() * W;
            for (int j = 0; j < m; ++j) {
                double d = R(j, j);
                sums[j] += std::log(std::abs(d));
                if (d < 0.0) Q.col(j) *= -1.0;
            }
            W = Q;
            time = (i + 1) * h;
        }
    }
    return sums / time;
}

inline Vec benettin_exponents_map(const MapSpec& spec, Vec u, double s, int n) {
    const int m = spec.dim;
    Mat W = Mat::Identity(m, m);
    Vec sums = Vec::Zero(m);
    for (int i = 0; i < n; ++i) {
        W = spec.step_jac_u(u, s) * W;
        u = spec.step(u, s);
        Eigen::HouseholderQR<Mat> qr(W);
        Mat Q = qr.householderQ() * Mat::Identity(m, m);
        Mat R = Q.transpose() * W;
        for (int j = 0; j < m; ++j) {
            double d = R(j, j);
            sums[j] += std::log(std::abs(d));
            if (d < 0.0) Q.col(j) *= -1.0;
        }
        W = Q;
    }
    return sums / double(n);
}

// ---------------------------------------------------------------------------
// Brute-force shadowing sums for the unperturbed cat map (s = 0). Since
// M^n Ps = lam_minus^n Ps and M^n Pu = lam_plus^n Pu, the sums are evaluated
// in spectral form: every weight is at most one, so roundoff never gets
// amplified by matrix powers. `window` holds the orbit states u_0..u_N.
// ---------------------------------------------------------------------------

/// v_i = sum_{l<i} lam_-^{i-l-1} Ps g(u_l) - sum_{l>=i} lam_+^{i-l-1} Pu g(u_l),
/// where g is spec.step_jac_s.
inline std::vector<Vec> brute_force_tangent_shadowing(const CatMap& cm, const MapSpec& spec,
                                                      const std::vector<Vec>& window) {
    const int N = static_cast<int>(window.size()) - 1;
    std::vector<Vec> v(N + 1);
    for (int i = 0; i <= N; ++i) {
        Vec acc = Vec::Zero(2);
        for (int l = 0; l < i; ++l)
            acc += std::pow(cm.lam_minus, i - l - 1) * (cm.Ps * spec.step_jac_s(window[l], 0.0));
        for (int l = i; l < N; ++l)
            acc -= std::pow(cm.lam_plus, i - l - 1) * (cm.Pu * spec.step_jac_s(window[l], 0.0));
        v[i] = acc;
    }
    return v;
}

/// vbar_l = sum_{i>=l} lam_-^{i-l} Ps J_u(u_i) - sum_{i<l} lam_+^{i-l} Pu J_u(u_i)
/// over the window (M symmetric, so transposes drop out).
inline std::vector<Vec> brute_force_adjoint_shadowing(const CatMap& cm, const MapSpec& spec,
                                                      const std::vector<Vec>& window) {
    const int N = static_cast<int>(window.size()) - 1;
    std::vector<Vec> vb(N + 1);
    for (int l = 0; l <= N; ++l) {
        Vec acc = Vec::Zero(2);
        for (int i = l; i < N; ++i)
            acc += std::pow(cm.lam_minus, i - l) * (cm.Ps * spec.objective_grad_u(window[i], 0.0));
        for (int i = 0; i < l; ++i)
            acc -= std::pow(cm.lam_plus, i - l) * (cm.Pu * spec.objective_grad_u(window[i], 0.0));
        vb[l] = acc;
    }
    return vb;
}

// ---------------------------------------------------------------------------
// Misc helpers.
// ---------------------------------------------------------------------------

inline Vec random_unit(std::mt19937_64& rng, int m) {
    std::normal_distribution<double> g(0.0, 1.0);
    Vec v(m);
    for (int i = 0; i < m; ++i) v[i] = g(rng);
    return v / v.norm();
}

/// Loose bounding box of the standard chaotic attractor at sigma=10,
/// beta=8/3, rho=28, from long reference runs.
inline bool inside_lorenz_box(const Vec& u) {
    return std::abs(u[0]) < 25.0 && std::abs(u[1]) < 35.0 && u[2] > -1.0 && u[2] < 55.0;
}

} // namespace oracle
