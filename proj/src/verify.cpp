#include "clvshadow/verify.hpp"

#include "clvshadow/tangent.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <random>

namespace clvshadow {

bool all_pass(const std::vector<PropertyCheck>& checks) {
    for (const auto& c : checks)
        if (!c.pass) return false;
    return true;
}

namespace {

Vec gaussian(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    Vec v(m);
    for (int i = 0; i < m; ++i) v[i] = n(rng);
    return v;
}

PropertyCheck make_check(std::string name, double measured, double threshold) {
    PropertyCheck c;
    c.name = std::move(name);
    c.measured = measured;
    c.threshold = threshold;
    c.pass = measured <= threshold;
    return c;
}

/// Operator norm cap for the oblique projector onto `sel`: 1/sin of the
/// smallest principal angle between the selected span and its complement.
double projector_cap(const ClvBasis& clv, int k, const std::vector<int>& sel) {
    const int m = clv.dim();
    std::vector<bool> in(m, false);
    for (int j : sel) in[j] = true;
    Mat s(m, static_cast<int>(sel.size()));
    Mat c(m, m - static_cast<int>(sel.size()));
    int si = 0, ci = 0;
    for (int j = 0; j < m; ++j) {
        if (in[j]) s.col(si++) = clv.frames[k].col(j);
        else c.col(ci++) = clv.frames[k].col(j);
    }
    Mat qs = Eigen::HouseholderQR<Mat>(s).householderQ() * Mat::Identity(m, s.cols());
    Mat qc = Eigen::HouseholderQR<Mat>(c).householderQ() * Mat::Identity(m, c.cols());
    Eigen::JacobiSVD<Mat> svd(qs.transpose() * qc);
    double cosmax = std::min(svd.singularValues()[0], 1.0 - 1e-15);
    return 1.0 / std::sqrt(1.0 - cosmax * cosmax);
}

/// Growth rate of dual direction j measured with the adjoint propagator,
/// renormalized every grid interval so nothing overflows. Propagates toward
/// the direction's growing side (backward for expanding, forward for
/// contracting), which keeps the measurement numerically stable.
template <class Spec>
double dual_rate(const Spec& spec, const Trajectory& traj, const ClvBasis& clv,
                 const AdjointClvBasis& adj, int j, int k0, int k1) {
    const bool backward = clv.exponents[j] >= 0.0;
    Vec w = adj.frames[backward ? k1 : k0].col(j);
    double acc = 0.0;
    if (backward) {
        for (int k = k1; k > k0; --k) {
            w = adjoint_propagate(spec, traj, clv.traj_index(k), clv.traj_index(k - 1), w);
            acc += std::log(w.norm());
            w.normalize();
        }
    } else {
        for (int k = k0; k < k1; ++k) {
            w = adjoint_propagate(spec, traj, clv.traj_index(k), clv.traj_index(k + 1), w);
            acc += std::log(w.norm());
            w.normalize();
        }
    }
    double rate = acc / ((k1 - k0) * clv.grid_dt);
    return backward ? rate : -rate;
}

struct SuiteTuning {
    double commutation_tol = 1e-6;
    double pairing_tol;       // flows: quadrature drift; maps: roundoff
    int pairing_span;         // grid intervals
    double rate_tol = 0.02;
    double biorth_tol = 1e-8;
    bool flow;
};

/// Per-direction sampling span for the growth-rate check, in grid points:
/// long enough to average boundary effects, short enough to stay cheap. The
/// neutral direction is capped harder because contamination from the leading
/// expanding dual grows with the span.
int rate_span_flow(const ClvBasis& clv, int j) {
    double T;
    if (clv.neutral_index && *clv.neutral_index == j) T = 20.0;
    else if (clv.exponents[j] > 0.0) T = 40.0;
    else T = 60.0;
    int span = static_cast<int>(std::round(T / clv.grid_dt));
    return std::max(1, std::min(span, clv.points() - 1));
}

template <class Spec>
void lemma_checks(std::vector<PropertyCheck>& out, const Spec& spec, const Trajectory& traj,
                  const ClvBasis& clv, const AdjointClvBasis& adj, const VerifyOptions& opts,
                  const SuiteTuning& tune) {
    const int m = clv.dim();
    const int K = clv.points() - 1;
    const double s = traj.parameter;
    std::mt19937_64 rng(opts.seed);
    std::uniform_int_distribution<int> grid(0, K - 1);

    // Analytic derivative callbacks against central differences at states
    // drawn from the orbit.
    {
        std::vector<Vec> pts;
        int npts = std::min(opts.samples, 50);
        for (int i = 0; i < npts; ++i)
            pts.push_back(traj.states[static_cast<std::size_t>(
                std::uniform_int_distribution<int>(0, traj.steps())(rng))]);
        out.push_back(make_check("analytic-derivatives-match-finite-differences",
                                 check_derivatives(spec, pts, s).max(), 1e-4));
    }

    auto random_pick = [&](bool need_complement) {
        for (;;) {
            int roll = std::uniform_int_distribution<int>(0, tune.flow ? 4 : 3)(rng);
            Pick pick = Pick::single(std::uniform_int_distribution<int>(0, m - 1)(rng));
            if (roll == 1) pick = Pick::plus();
            if (roll == 2) pick = Pick::minus();
            if (roll == 3) pick = Pick::plus_minus();
            if (roll == 4) pick = Pick::zero();
            std::vector<int> sel = clv.picked(pick);
            if (sel.empty()) continue;
            if (need_complement && static_cast<int>(sel.size()) == m) continue;
            return pick;
        }
    };

    // Propagating then projecting equals projecting then propagating, for
    // the tangent flow operator and picked tangent subspaces...
    {
        double worst = 0.0;
        for (int n = 0; n < opts.samples; ++n) {
            int k = grid(rng);
            Pick pick = random_pick(false);
            Vec v = gaussian(m, rng);
            int i0 = clv.traj_index(k), i1 = clv.traj_index(k + 1);
            Vec moved = propagate(spec, traj, i0, i1, v);
            Vec lhs = propagate(spec, traj, i0, i1, project(clv, k, pick, v));
            Vec rhs = project(clv, k + 1, pick, moved);
            worst = std::max(worst, (lhs - rhs).norm() / std::max(moved.norm(), 1e-300));
        }
        out.push_back(make_check("tangent-propagation-commutes-with-projection", worst,
                                 tune.commutation_tol));
    }

    // ... and for the adjoint flow operator with dual subspaces.
    {
        double worst = 0.0;
        for (int n = 0; n < opts.samples; ++n) {
            int k = grid(rng);
            Pick pick = random_pick(false);
            Vec w = gaussian(m, rng);
            int i0 = clv.traj_index(k), i1 = clv.traj_index(k + 1);
            Vec moved = adjoint_propagate(spec, traj, i1, i0, w);
            Vec lhs = adjoint_propagate(spec, traj, i1, i0, adjoint_project(clv, k + 1, pick, w));
            Vec rhs = adjoint_project(clv, k, pick, moved);
            worst = std::max(worst, (lhs - rhs).norm() / std::max(moved.norm(), 1e-300));
        }
        out.push_back(make_check("adjoint-propagation-commutes-with-projection", worst,
                                 tune.commutation_tol));
    }

    // Oblique projections never beat the angle bound between the selected
    // span and its complement.
    {
        double worst = 0.0;
        for (int n = 0; n < opts.samples; ++n) {
            int k = grid(rng);
            Pick pick = random_pick(true);
            double cap = projector_cap(clv, k, clv.picked(pick));
            Vec v = gaussian(m, rng);
            double t = project(clv, k, pick, v).norm() / v.norm();
            double tbar = adjoint_project(clv, k, pick, v).norm() / v.norm();
            worst = std::max(worst, std::max(t, tbar) / cap);
        }
        out.push_back(make_check("oblique-projection-norm-within-angle-bound", worst,
                                 1.0 + 1e-8));
    }

    // <w(t), v(t)> is invariant when v moves with the tangent propagator and
    // w with the adjoint one.
    {
        double worst = 0.0;
        std::uniform_int_distribution<int> start(0, K - tune.pairing_span);
        for (int n = 0; n < opts.samples; ++n) {
            int k0 = start(rng);
            int k1 = k0 + tune.pairing_span;
            Vec v0 = gaussian(m, rng);
            Vec w1 = gaussian(m, rng);
            int i0 = clv.traj_index(k0), i1 = clv.traj_index(k1);
            Vec w0 = adjoint_propagate(spec, traj, i1, i0, w1);
            Vec v1 = propagate(spec, traj, i0, i1, v0);
            double p0 = w0.dot(v0), p1 = w1.dot(v1);
            worst = std::max(worst,
                             std::abs(p1 - p0) / std::max(std::abs(p0), 1e-3 * w0.norm() * v0.norm()));
        }
        out.push_back(make_check("adjoint-tangent-pairing-constant-along-orbit", worst,
                                 tune.pairing_tol));
    }

    // Scaled dual columns pair to exactly one with their own tangent
    // direction and to zero with every other.
    {
        double worst = 0.0;
        for (int n = 0; n < opts.samples; ++n) {
            int k = grid(rng);
            Mat gram = adj.frames[k].transpose() * clv.frames[k];
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) {
                    double expect = (i == j) ? 1.0 : 0.0;
                    worst = std::max(worst, std::abs(adj.dual_scale(i, k) * gram(i, j) - expect));
                }
        }
        out.push_back(make_check("dual-basis-biorthogonal", worst, tune.biorth_tol));
    }

    // Measured adjoint growth rates reproduce the tangent exponents.
    {
        double worst = 0.0;
        for (int j = 0; j < m; ++j) {
            int span = tune.flow ? rate_span_flow(clv, j) : std::min(K, 50);
            std::uniform_int_distribution<int> start(0, K - span);
            double mean = 0.0;
            for (int n = 0; n < opts.samples; ++n) {
                int k0 = start(rng);
                mean += dual_rate(spec, traj, clv, adj, j, k0, k0 + span);
            }
            mean /= opts.samples;
            worst = std::max(worst, std::abs(mean - clv.exponents[j]));
        }
        out.push_back(make_check("adjoint-exponents-match-tangent-exponents", worst,
                                 tune.rate_tol));
    }
}

} // namespace

std::vector<PropertyCheck> property_suite(const SystemSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const AdjointClvBasis& adj,
                                          const AdjointShadowing& shadow,
                                          const VerifyOptions& opts) {
    SuiteTuning tune;
    tune.flow = true;
    tune.pairing_tol = 1e-5;
    tune.pairing_span = std::max(1, static_cast<int>(std::round(2.0 / clv.grid_dt)));
    tune.pairing_span = std::min(tune.pairing_span, clv.points() - 1);

    std::vector<PropertyCheck> out;
    lemma_checks(out, spec, traj, clv, adj, opts, tune);

    // Neutral adjoint projection via the drift pairing against the frame
    // projector.
    {
        std::mt19937_64 rng(opts.seed + 1);
        std::uniform_int_distribution<int> grid(0, clv.points() - 1);
        const double s = traj.parameter;
        double worst = 0.0;
        for (int n = 0; n < opts.samples; ++n) {
            int k = grid(rng);
            Vec v = gaussian(clv.dim(), rng);
            Vec f = spec.drift(traj.states[clv.traj_index(k)], s);
            Vec a = neutral_project_via_y(v, f, adj.y(k));
            Vec b = adjoint_project(clv, k, Pick::zero(), v);
            worst = std::max(worst, (a - b).norm() / v.norm());
        }
        out.push_back(make_check("neutral-projection-formula-matches-frame-projector",
                                 worst, 1e-8));
    }

    const ShadowingDiagnostics& d = shadow.diagnostics;
    out.push_back(make_check("adjoint-ode-residual-within-quadrature-tolerance",
                             d.residual / std::max(d.residual_scale, 1e-300), 10.0));
    out.push_back(make_check("no-unstable-component-at-window-start",
                             d.unstable_at_start, 1e-6));
    out.push_back(make_check("shadowing-direction-bounded-across-window",
                             d.growth_ratio, 2.0));
    out.push_back(make_check("drift-pairing-average-small", d.f_pairing_avg, 0.05));
    return out;
}

std::vector<PropertyCheck> property_suite(const MapSpec& spec, const Trajectory& traj,
                                          const ClvBasis& clv, const AdjointClvBasis& adj,
                                          const MapShadowing& shadow,
                                          const VerifyOptions& opts) {
    SuiteTuning tune;
    tune.flow = false;
    tune.pairing_tol = 1e-12;
    tune.pairing_span = std::min(20, clv.points() - 1);

    std::vector<PropertyCheck> out;
    lemma_checks(out, spec, traj, clv, adj, opts, tune);

    const ShadowingDiagnostics& d = shadow.diagnostics;
    out.push_back(make_check("adjoint-recursion-residual-small", d.residual, 1e-10));
    out.push_back(make_check("no-unstable-component-at-window-start",
                             d.unstable_at_start, 1e-8));
    out.push_back(make_check("shadowing-direction-bounded-across-window",
                             d.growth_ratio, 2.0));
    return out;
}

} // namespace clvshadow
