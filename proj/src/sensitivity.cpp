#include "clvshadow/sensitivity.hpp"

#include <cmath>
#include <random>

namespace clvshadow {

namespace {

/// Standard error of ten contiguous segment means of the node terms.
double segment_stderr(const std::vector<double>& terms) {
    const int n = static_cast<int>(terms.size());
    const int nseg = std::min(10, n);
    if (nseg < 2) return 0.0;
    std::vector<double> means(nseg, 0.0);
    for (int g = 0; g < nseg; ++g) {
        int lo = static_cast<int>(static_cast<long long>(g) * n / nseg);
        int hi = static_cast<int>(static_cast<long long>(g + 1) * n / nseg);
        for (int i = lo; i < hi; ++i) means[g] += terms[i];
        means[g] /= std::max(hi - lo, 1);
    }
    double mu = 0.0;
    for (double m : means) mu += m;
    mu /= nseg;
    double var = 0.0;
    for (double m : means) var += (m - mu) * (m - mu);
    var /= (nseg - 1);
    return std::sqrt(var / nseg);
}

double trapezoid_mean(const std::vector<double>& terms) {
    const int n = static_cast<int>(terms.size());
    double acc = 0.0;
    for (int k = 0; k < n; ++k) acc += ((k == 0 || k == n - 1) ? 0.5 : 1.0) * terms[k];
    return acc / (n - 1);
}

double plain_mean(const std::vector<double>& terms) {
    double acc = 0.0;
    for (double t : terms) acc += t;
    return acc / terms.size();
}

} // namespace

SensitivityResult sensitivity_tangent_flow(const SystemSpec& spec, const Trajectory& traj,
                                           const ClvBasis& clv, const TangentShadowing& shadow) {
    const int n = shadow.points();
    const double s = traj.parameter;
    std::vector<double> terms(n);
    for (int k = 0; k < n; ++k) {
        const Vec& u = traj.states[clv.traj_index(shadow.first_grid + k)];
        terms[k] = spec.objective_grad_u(u, s).dot(shadow.v[k]) +
                   shadow.eta[k] * (spec.objective(u, s) - shadow.j_mean) +
                   spec.objective_grad_s(u, s);
    }
    SensitivityResult out;
    out.method = "tangent-flow";
    out.value = trapezoid_mean(terms);
    out.stderr_est = segment_stderr(terms);
    out.horizon = (n - 1) * shadow.grid_dt;
    return out;
}

SensitivityResult sensitivity_adjoint_flow(const SystemSpec& spec, const Trajectory& traj,
                                           const ClvBasis& clv, const AdjointShadowing& shadow) {
    const int n = shadow.points();
    const double s = traj.parameter;
    std::vector<double> terms(n);
    for (int k = 0; k < n; ++k) {
        const Vec& u = traj.states[clv.traj_index(shadow.first_grid + k)];
        terms[k] = shadow.v[k].dot(spec.drift_jac_s(u, s)) + spec.objective_grad_s(u, s);
    }
    SensitivityResult out;
    out.method = "adjoint-flow";
    out.value = trapezoid_mean(terms);
    out.stderr_est = segment_stderr(terms);
    out.horizon = (n - 1) * shadow.grid_dt;
    return out;
}

SensitivityResult sensitivity_tangent_map(const MapSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const MapShadowing& shadow) {
    if (shadow.v.empty())
        throw InvalidConfigError("sensitivity_tangent_map needs a tangent sequence");
    const int n = static_cast<int>(shadow.v.size());
    const double s = traj.parameter;
    std::vector<double> terms(n - 1);
    for (int i = 0; i + 1 < n; ++i) {
        const Vec& u = traj.states[clv.traj_index(shadow.first_grid + i)];
        terms[i] = spec.objective_grad_u(u, s).dot(shadow.v[i]) + spec.objective_grad_s(u, s);
    }
    SensitivityResult out;
    out.method = "tangent-map";
    out.value = plain_mean(terms);
    out.stderr_est = segment_stderr(terms);
    out.horizon = n - 1;
    return out;
}

SensitivityResult sensitivity_adjoint_map(const MapSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const MapShadowing& shadow) {
    if (shadow.v_bar.empty())
        throw InvalidConfigError("sensitivity_adjoint_map needs an adjoint sequence");
    const int n = static_cast<int>(shadow.v_bar.size());
    const double s = traj.parameter;
    std::vector<double> terms(n - 1);
    for (int l = 0; l + 1 < n; ++l) {
        const Vec& u = traj.states[clv.traj_index(shadow.first_grid + l)];
        terms[l] = shadow.v_bar[l + 1].dot(spec.step_jac_s(u, s)) +
                   spec.objective_grad_s(u, s);
    }
    SensitivityResult out;
    out.method = "adjoint-map";
    out.value = plain_mean(terms);
    out.stderr_est = segment_stderr(terms);
    out.horizon = n - 1;
    return out;
}

namespace {

SensitivityResult summarize_fd(std::vector<double>& derivs, double horizon) {
    SensitivityResult out;
    out.method = "finite-difference";
    out.horizon = horizon;
    double mu = 0.0;
    for (double d : derivs) mu += d;
    mu /= derivs.size();
    out.value = mu;
    if (derivs.size() > 1) {
        double var = 0.0;
        for (double d : derivs) var += (d - mu) * (d - mu);
        var /= (derivs.size() - 1);
        out.stderr_est = std::sqrt(var / derivs.size());
    }
    return out;
}

} // namespace

SensitivityResult finite_difference_oracle(const FlowEntry& entry, double s, FdOptions opts) {
    if (opts.ds <= 0.0) opts.ds = entry.defaults.fd_ds;
    if (opts.step <= 0.0) opts.step = entry.defaults.step;
    if (opts.spinup < 0.0) opts.spinup = entry.defaults.spinup;
    if (!(opts.horizon > 0.0))
        throw InvalidConfigError("finite_difference_oracle: horizon must be positive");
    if (opts.ensemble < 1)
        throw InvalidConfigError("finite_difference_oracle: ensemble must be at least 1");
    const int n = static_cast<int>(std::round(opts.horizon / opts.step));

    std::mt19937_64 rng(opts.seed);
    std::vector<double> derivs(opts.ensemble);
    for (int e = 0; e < opts.ensemble; ++e) {
        Vec u0 = sample_initial_state(entry.defaults, rng);
        double plus = average_objective(
            entry.spec, spinup(entry.spec, u0, s + opts.ds, opts.spinup, opts.step),
            s + opts.ds, opts.step, n);
        double minus = average_objective(
            entry.spec, spinup(entry.spec, u0, s - opts.ds, opts.spinup, opts.step),
            s - opts.ds, opts.step, n);
        derivs[e] = (plus - minus) / (2.0 * opts.ds);
    }
    return summarize_fd(derivs, opts.horizon);
}

SensitivityResult finite_difference_oracle(const MapEntry& entry, double s, FdOptions opts) {
    if (opts.ds <= 0.0) opts.ds = entry.defaults.fd_ds;
    if (opts.spinup < 0.0) opts.spinup = entry.defaults.spinup;
    if (!(opts.horizon > 0.0))
        throw InvalidConfigError("finite_difference_oracle: horizon must be positive");
    if (opts.ensemble < 1)
        throw InvalidConfigError("finite_difference_oracle: ensemble must be at least 1");
    const int n = static_cast<int>(std::round(opts.horizon));
    const int burn = static_cast<int>(std::round(opts.spinup));

    std::mt19937_64 rng(opts.seed);
    std::vector<double> derivs(opts.ensemble);
    for (int e = 0; e < opts.ensemble; ++e) {
        Vec u0 = sample_initial_state(entry.defaults, rng);
        double plus = average_objective(entry.spec, spinup(entry.spec, u0, s + opts.ds, burn),
                                        s + opts.ds, n);
        double minus = average_objective(entry.spec, spinup(entry.spec, u0, s - opts.ds, burn),
                                         s - opts.ds, n);
        derivs[e] = (plus - minus) / (2.0 * opts.ds);
    }
    return summarize_fd(derivs, opts.horizon);
}

} // namespace clvshadow
