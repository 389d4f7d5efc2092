#include "clvshadow/shadowing.hpp"

#include <cmath>

namespace clvshadow {

namespace {

/// Slowest contraction/expansion rate used to size truncation buffers.
double slowest_rate(const ClvBasis& clv) {
    double rate = 0.0;
    bool found = false;
    for (int j = 0; j < clv.exponents.size(); ++j) {
        if (clv.neutral_index && *clv.neutral_index == j) continue;
        double a = std::abs(clv.exponents[j]);
        if (!found || a < rate) { rate = a; found = true; }
    }
    if (!found || rate <= 0.0)
        throw TruncationError("cannot size a truncation buffer: no hyperbolic exponents");
    return rate;
}

int resolve_buffer(const ClvBasis& clv, const ShadowingOptions& opts, int K) {
    int buffer;
    if (opts.buffer >= 0) {
        buffer = opts.buffer;
        if (buffer > 0) {
            double tail = std::exp(-slowest_rate(clv) * buffer * clv.grid_dt);
            if (tail > opts.truncation_tol)
                throw TruncationError("buffer of " + std::to_string(buffer) +
                                      " grid intervals leaves truncated-tail weight " +
                                      std::to_string(tail) + " above tolerance " +
                                      std::to_string(opts.truncation_tol));
        }
    } else {
        double rate = slowest_rate(clv);
        buffer = static_cast<int>(std::ceil(std::log(1e8) / (rate * clv.grid_dt)));
    }
    if (K - 2 * buffer < 8)
        throw InvalidConfigError("covariant window leaves fewer than 8 grid intervals after "
                                 "trimming " + std::to_string(buffer) + " per side");
    return buffer;
}

double flow_objective_mean(const SystemSpec& spec, const Trajectory& traj) {
    const double s = traj.parameter;
    double acc = 0.0;
    const int N = traj.steps();
    for (int i = 0; i <= N; ++i) {
        double w = (i == 0 || i == N) ? 0.5 : 1.0;
        acc += w * spec.objective(traj.states[i], s);
    }
    return acc / N;
}

double map_objective_mean(const MapSpec& spec, const Trajectory& traj) {
    const double s = traj.parameter;
    double acc = 0.0;
    const int N = traj.steps();
    for (int i = 0; i < N; ++i) acc += spec.objective(traj.states[i], s);
    return acc / N;
}

} // namespace

TangentShadowing tangent_shadowing_flow(const SystemSpec& spec, const Trajectory& traj,
                                        const ClvBasis& clv, const ShadowingOptions& opts) {
    if (traj.kind != Trajectory::Kind::flow)
        throw InvalidConfigError("tangent_shadowing_flow needs a flow trajectory");
    if (!clv.neutral_index)
        throw InvalidConfigError("tangent_shadowing_flow needs a basis with a neutral direction");
    const int m = clv.dim();
    const int K = clv.points() - 1;
    const double dt = clv.grid_dt;
    const double s = traj.parameter;

    Mat a(m, K + 1); // parameter forcing in covariant coordinates
    for (int k = 0; k <= K; ++k) {
        const Vec& u = traj.states[clv.traj_index(k)];
        a.col(k) = clv.frames[k].partialPivLu().solve(spec.drift_jac_s(u, s));
    }

    Mat b = Mat::Zero(m, K + 1);
    for (int j : clv.picked(Pick::minus())) {
        for (int k = 0; k < K; ++k) {
            double g = clv.growth_factor(j, k);
            b(j, k + 1) = g * b(j, k) + 0.5 * dt * (g * a(j, k) + a(j, k + 1));
        }
    }
    for (int j : clv.picked(Pick::plus())) {
        for (int k = K - 1; k >= 0; --k) {
            double ginv = std::exp(-clv.log_growth(j, k));
            b(j, k) = ginv * b(j, k + 1) - 0.5 * dt * (a(j, k) + ginv * a(j, k + 1));
        }
    }

    const int buffer = resolve_buffer(clv, opts, K);
    const int w0 = buffer, w1 = K - buffer;
    const int j0 = *clv.neutral_index;

    TangentShadowing out;
    out.first_grid = w0;
    out.grid_dt = dt;
    out.j_mean = flow_objective_mean(spec, traj);
    out.v.reserve(w1 - w0 + 1);
    out.eta.resize(w1 - w0 + 1);
    for (int k = w0; k <= w1; ++k) {
        out.v.push_back(clv.frames[k] * b.col(k));
        Vec f = spec.drift(traj.states[clv.traj_index(k)], s);
        out.eta[k - w0] = -a(j0, k) * f.dot(clv.frames[k].col(j0)) / f.squaredNorm();
    }
    return out;
}

AdjointShadowing adjoint_shadowing_flow(const SystemSpec& spec, const Trajectory& traj,
                                        const ClvBasis& clv, const AdjointClvBasis& adj,
                                        const ShadowingOptions& opts) {
    if (traj.kind != Trajectory::Kind::flow)
        throw InvalidConfigError("adjoint_shadowing_flow needs a flow trajectory");
    if (!clv.neutral_index || adj.pairing.size() != clv.points())
        throw InvalidConfigError("adjoint_shadowing_flow needs a flow dual basis");
    const int m = clv.dim();
    const int K = clv.points() - 1;
    const double dt = clv.grid_dt;
    const double s = traj.parameter;

    Mat c(m, K + 1); // objective gradient paired with the tangent directions
    for (int k = 0; k <= K; ++k) {
        const Vec& u = traj.states[clv.traj_index(k)];
        c.col(k) = clv.frames[k].transpose() * spec.objective_grad_u(u, s);
    }

    Mat d = Mat::Zero(m, K + 1);
    for (int j : clv.picked(Pick::minus())) {
        for (int k = K - 1; k >= 0; --k) {
            double g = clv.growth_factor(j, k);
            d(j, k) = g * d(j, k + 1) + 0.5 * dt * (c(j, k) + g * c(j, k + 1));
        }
    }
    for (int j : clv.picked(Pick::plus())) {
        for (int k = 0; k < K; ++k) {
            double ginv = std::exp(-clv.log_growth(j, k));
            d(j, k + 1) = ginv * d(j, k) - 0.5 * dt * (ginv * c(j, k) + c(j, k + 1));
        }
    }

    const int buffer = resolve_buffer(clv, opts, K);
    const int w0 = buffer, w1 = K - buffer;
    const int j0 = *clv.neutral_index;

    AdjointShadowing out;
    out.first_grid = w0;
    out.grid_dt = dt;
    out.j_mean = flow_objective_mean(spec, traj);
    out.v.reserve(w1 - w0 + 1);
    out.v_pm.reserve(w1 - w0 + 1);
    out.v_zero.reserve(w1 - w0 + 1);
    for (int k = w0; k <= w1; ++k) {
        Vec vpm = clv.frames[k].transpose().partialPivLu().solve(d.col(k));
        double jt = spec.objective(traj.states[clv.traj_index(k)], s) - out.j_mean;
        Vec vzero = -(jt / adj.pairing[k]) * adj.frames[k].col(j0);
        out.v_pm.push_back(vpm);
        out.v_zero.push_back(vzero);
        out.v.push_back(vpm + vzero);
    }
    out.diagnostics = verify_properties(spec, traj, clv, out);
    return out;
}

MapShadowing tangent_shadowing_map(const MapSpec& spec, const Trajectory& traj,
                                   const ClvBasis& clv, const ShadowingOptions& opts) {
    if (traj.kind != Trajectory::Kind::map)
        throw InvalidConfigError("tangent_shadowing_map needs a map trajectory");
    if (clv.stride != 1)
        throw InvalidConfigError("map shadowing requires per-step covariant frames (stride 1)");
    const int m = clv.dim();
    const int K = clv.points() - 1;
    const double s = traj.parameter;

    // Forcing applied on the step into each grid point: ahat(:, l) expands
    // f_s(u_{l-1}) in the frame at l.
    Mat ahat = Mat::Zero(m, K + 1);
    for (int l = 1; l <= K; ++l) {
        const Vec& u = traj.states[clv.traj_index(l) - 1];
        ahat.col(l) = clv.frames[l].partialPivLu().solve(spec.step_jac_s(u, s));
    }

    Mat b = Mat::Zero(m, K + 1);
    for (int j : clv.picked(Pick::minus()))
        for (int i = 0; i < K; ++i)
            b(j, i + 1) = clv.growth_factor(j, i) * b(j, i) + ahat(j, i + 1);
    for (int j : clv.picked(Pick::plus()))
        for (int i = K - 1; i >= 0; --i)
            b(j, i) = (b(j, i + 1) - ahat(j, i + 1)) * std::exp(-clv.log_growth(j, i));

    const int buffer = resolve_buffer(clv, opts, K);
    const int w0 = buffer, w1 = K - buffer;

    MapShadowing out;
    out.first_grid = w0;
    out.j_mean = map_objective_mean(spec, traj);
    out.v.reserve(w1 - w0 + 1);
    for (int i = w0; i <= w1; ++i) out.v.push_back(clv.frames[i] * b.col(i));
    return out;
}

MapShadowing adjoint_shadowing_map(const MapSpec& spec, const Trajectory& traj,
                                   const ClvBasis& clv, const ShadowingOptions& opts) {
    if (traj.kind != Trajectory::Kind::map)
        throw InvalidConfigError("adjoint_shadowing_map needs a map trajectory");
    if (clv.stride != 1)
        throw InvalidConfigError("map shadowing requires per-step covariant frames (stride 1)");
    const int m = clv.dim();
    const int K = clv.points() - 1;
    const double s = traj.parameter;

    Mat c(m, K + 1);
    for (int l = 0; l <= K; ++l) {
        const Vec& u = traj.states[clv.traj_index(l)];
        c.col(l) = clv.frames[l].transpose() * spec.objective_grad_u(u, s);
    }

    Mat d = Mat::Zero(m, K + 1);
    for (int j : clv.picked(Pick::minus()))
        for (int l = K - 1; l >= 0; --l)
            d(j, l) = clv.growth_factor(j, l) * d(j, l + 1) + c(j, l);
    for (int j : clv.picked(Pick::plus()))
        for (int l = 0; l < K; ++l)
            d(j, l + 1) = (d(j, l) - c(j, l)) * std::exp(-clv.log_growth(j, l));

    const int buffer = resolve_buffer(clv, opts, K);
    const int w0 = buffer, w1 = K - buffer;

    MapShadowing out;
    out.first_grid = w0;
    out.j_mean = map_objective_mean(spec, traj);
    out.v_bar.reserve(w1 - w0 + 1);
    for (int l = w0; l <= w1; ++l)
        out.v_bar.push_back(clv.frames[l].transpose().partialPivLu().solve(d.col(l)));
    out.diagnostics = verify_properties(spec, traj, clv, out);
    return out;
}

namespace {

void boundedness_stats(const std::vector<Vec>& v, ShadowingDiagnostics& diag) {
    const int n = static_cast<int>(v.size());
    double sup = 0.0, first = 0.0, last = 0.0;
    for (int k = 0; k < n; ++k) {
        double a = v[k].norm();
        sup = std::max(sup, a);
        if (k < n / 4) first = std::max(first, a);
        if (k >= n - n / 4) last = std::max(last, a);
    }
    diag.sup_norm = sup;
    diag.growth_ratio = last / std::max(first, 1e-300);
}

} // namespace

ShadowingDiagnostics verify_properties(const SystemSpec& spec, const Trajectory& traj,
                                       const ClvBasis& clv, const AdjointShadowing& shadow) {
    ShadowingDiagnostics diag;
    const int n = shadow.points();
    if (n < 8) throw InvalidConfigError("verify_properties needs at least 8 window points");
    const double dt = shadow.grid_dt;
    const double s = traj.parameter;
    const int w0 = shadow.first_grid;

    boundedness_stats(shadow.v, diag);

    double max_res = 0.0, max_third = 0.0, max_ju = 0.0;
    for (int k = 1; k < n - 1; ++k) {
        const Vec& u = traj.states[clv.traj_index(w0 + k)];
        Vec res = (shadow.v[k + 1] - shadow.v[k - 1]) / (2.0 * dt) +
                  spec.drift_jac_u(u, s).transpose() * shadow.v[k] +
                  spec.objective_grad_u(u, s);
        max_res = std::max(max_res, res.norm());
        max_ju = std::max(max_ju, spec.objective_grad_u(u, s).norm());
        if (k >= 2 && k < n - 2) {
            Vec third = (shadow.v[k + 2] - 2.0 * shadow.v[k + 1] + 2.0 * shadow.v[k - 1] -
                         shadow.v[k - 2]) / (2.0 * dt * dt * dt);
            max_third = std::max(max_third, third.norm());
        }
    }
    diag.residual = max_res;
    diag.residual_scale = (dt * dt / 6.0) * max_third + 1e-12 * (1.0 + max_ju);

    diag.unstable_at_start = adjoint_project(clv, w0, Pick::plus(), shadow.v[0]).norm() /
                             std::max(shadow.v[0].norm(), 1e-300);

    double acc = 0.0, sup_f = 0.0, pm_max = 0.0;
    for (int k = 0; k < n; ++k) {
        Vec f = spec.drift(traj.states[clv.traj_index(w0 + k)], s);
        double w = (k == 0 || k == n - 1) ? 0.5 : 1.0;
        acc += w * shadow.v[k].dot(f);
        sup_f = std::max(sup_f, f.norm());
        pm_max = std::max(pm_max, std::abs(shadow.v_pm[k].dot(f)) /
                                      std::max(shadow.v_pm[k].norm() * f.norm(), 1e-300));
    }
    diag.f_pairing_avg = std::abs(acc / (n - 1)) /
                         std::max(diag.sup_norm * sup_f, 1e-300);
    diag.f_pairing_pm_max = pm_max;
    return diag;
}

ShadowingDiagnostics verify_properties(const MapSpec& spec, const Trajectory& traj,
                                       const ClvBasis& clv, const MapShadowing& shadow) {
    ShadowingDiagnostics diag;
    const int n = static_cast<int>(shadow.v_bar.size());
    if (n < 2) throw InvalidConfigError("verify_properties needs an adjoint sequence");
    const double s = traj.parameter;
    const int w0 = shadow.first_grid;

    boundedness_stats(shadow.v_bar, diag);

    double max_res = 0.0, max_ju = 0.0, max_fu = 0.0;
    for (int l = 0; l < n - 1; ++l) {
        const Vec& u = traj.states[clv.traj_index(w0 + l)];
        Mat fu = spec.step_jac_u(u, s);
        Vec res = shadow.v_bar[l] - fu.transpose() * shadow.v_bar[l + 1] -
                  spec.objective_grad_u(u, s);
        max_res = std::max(max_res, res.norm());
        max_ju = std::max(max_ju, spec.objective_grad_u(u, s).norm());
        max_fu = std::max(max_fu, fu.norm());
    }
    diag.residual = max_res;
    diag.residual_scale = 1e-14 * (diag.sup_norm * max_fu + max_ju);

    diag.unstable_at_start = adjoint_project(clv, w0, Pick::plus(), shadow.v_bar[0]).norm() /
                             std::max(shadow.v_bar[0].norm(), 1e-300);
    return diag;
}

void inject_unstable_fault(AdjointShadowing& shadow, const ClvBasis& clv,
                           const AdjointClvBasis& adj, double eps) {
    std::vector<int> plus = clv.picked(Pick::plus());
    if (plus.empty()) throw InvalidConfigError("no expanding direction to inject");
    int js = plus.front(); // exponent-sorted, so the leading expanding direction
    const int n = shadow.points();
    const int w0 = shadow.first_grid;
    const int w1 = w0 + n - 1;

    // Homogeneous adjoint solution through the expanding dual direction,
    // unit size at the window end, amplified backward.
    std::vector<double> amp(n);
    amp[n - 1] = 1.0;
    for (int k = w1 - 1; k >= w0; --k) {
        amp[k - w0] = amp[k - w0 + 1] * clv.growth_factor(js, k) *
                      (adj.dual_scale(js, k) / adj.dual_scale(js, k + 1));
        if (!std::isfinite(amp[k - w0]) || std::abs(amp[k - w0]) > 1e280)
            throw GrowthOverflowError("fault amplification overflowed; use a shorter window");
    }
    for (int k = 0; k < n; ++k) {
        Vec fault = eps * amp[k] * adj.frames[w0 + k].col(js);
        shadow.v[k] += fault;
        shadow.v_pm[k] += fault;
    }
}

void inject_unstable_fault(MapShadowing& shadow, const ClvBasis& clv,
                           const AdjointClvBasis& adj, double eps) {
    if (shadow.v_bar.empty())
        throw InvalidConfigError("map fault injection needs an adjoint sequence");
    std::vector<int> plus = clv.picked(Pick::plus());
    if (plus.empty()) throw InvalidConfigError("no expanding direction to inject");
    shadow.v_bar[0] += eps * adj.frames[shadow.first_grid].col(plus.front());
}

} // namespace clvshadow
