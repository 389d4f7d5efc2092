#include "clvshadow/tangent.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "clvshadow/detail/steppers.hpp"

namespace clvshadow {

using detail::guard_growth;
using detail::require_range;
using detail::rk4_tangent_backward;
using detail::rk4_tangent_forced;
using detail::rk4_tangent_forward;
using detail::Stages;
using detail::stages_for;

Mat tangent_step_matrix(const SystemSpec& spec, const Trajectory& traj, int i) {
    require_range(traj, i, i + 1, "tangent_step_matrix");
    Stages st = stages_for(spec, traj, i);
    return rk4_tangent_forward(st, Mat(Mat::Identity(spec.dim, spec.dim)));
}

Mat tangent_step_matrix(const MapSpec& spec, const Trajectory& traj, int i) {
    require_range(traj, i, i + 1, "tangent_step_matrix");
    return spec.step_jac_u(traj.states[i], traj.parameter);
}

TangentSolution solve_homogeneous_tangent(const SystemSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w0) {
    require_range(traj, i0, i1, "solve_homogeneous_tangent");
    TangentSolution sol;
    sol.first_index = i0;
    sol.values.reserve(i1 - i0 + 1);
    sol.values.push_back(w0);
    Vec w = w0;
    for (int i = i0; i < i1; ++i) {
        w = rk4_tangent_forward(stages_for(spec, traj, i), w);
        guard_growth(w.norm(), "tangent solution", i + 1);
        sol.values.push_back(w);
    }
    return sol;
}

TangentSolution solve_homogeneous_tangent(const MapSpec& spec, const Trajectory& traj,
                                          int i0, int i1, const Vec& w0) {
    require_range(traj, i0, i1, "solve_homogeneous_tangent");
    TangentSolution sol;
    sol.first_index = i0;
    sol.values.reserve(i1 - i0 + 1);
    sol.values.push_back(w0);
    Vec w = w0;
    for (int i = i0; i < i1; ++i) {
        w = spec.step_jac_u(traj.states[i], traj.parameter) * w;
        guard_growth(w.norm(), "tangent solution", i + 1);
        sol.values.push_back(w);
    }
    return sol;
}

TangentSolution solve_inhomogeneous_tangent(const SystemSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& v0,
                                            const std::vector<Vec>& forcing) {
    require_range(traj, i0, i1, "solve_inhomogeneous_tangent");
    if (static_cast<int>(forcing.size()) < i1 - i0 + 1)
        throw InvalidConfigError("solve_inhomogeneous_tangent: forcing must cover every node");
    TangentSolution sol;
    sol.first_index = i0;
    sol.values.reserve(i1 - i0 + 1);
    sol.values.push_back(v0);
    Vec v = v0;
    for (int i = i0; i < i1; ++i) {
        v = rk4_tangent_forced(stages_for(spec, traj, i), v, forcing[i - i0], forcing[i - i0 + 1]);
        guard_growth(v.norm(), "tangent solution", i + 1);
        sol.values.push_back(v);
    }
    return sol;
}

TangentSolution solve_inhomogeneous_tangent(const MapSpec& spec, const Trajectory& traj,
                                            int i0, int i1, const Vec& v0,
                                            const std::vector<Vec>& forcing) {
    require_range(traj, i0, i1, "solve_inhomogeneous_tangent");
    if (static_cast<int>(forcing.size()) < i1 - i0)
        throw InvalidConfigError("solve_inhomogeneous_tangent: forcing must cover every step");
    TangentSolution sol;
    sol.first_index = i0;
    sol.values.reserve(i1 - i0 + 1);
    sol.values.push_back(v0);
    Vec v = v0;
    for (int i = i0; i < i1; ++i) {
        v = spec.step_jac_u(traj.states[i], traj.parameter) * v + forcing[i - i0];
        guard_growth(v.norm(), "tangent solution", i + 1);
        sol.values.push_back(v);
    }
    return sol;
}

Vec propagate(const SystemSpec& spec, const Trajectory& traj, int i1, int i2, const Vec& w) {
    require_range(traj, std::min(i1, i2), std::max(i1, i2), "propagate");
    Vec v = w;
    if (i2 >= i1) {
        for (int i = i1; i < i2; ++i) {
            v = rk4_tangent_forward(stages_for(spec, traj, i), v);
            guard_growth(v.norm(), "propagated vector", i + 1);
        }
    } else {
        for (int i = i1 - 1; i >= i2; --i) {
            v = rk4_tangent_backward(stages_for(spec, traj, i), v);
            guard_growth(v.norm(), "propagated vector", i);
        }
    }
    return v;
}

Vec propagate(const MapSpec& spec, const Trajectory& traj, int i1, int i2, const Vec& w) {
    require_range(traj, std::min(i1, i2), std::max(i1, i2), "propagate");
    Vec v = w;
    if (i2 >= i1) {
        for (int i = i1; i < i2; ++i) {
            v = spec.step_jac_u(traj.states[i], traj.parameter) * v;
            guard_growth(v.norm(), "propagated vector", i + 1);
        }
    } else {
        for (int i = i1 - 1; i >= i2; --i) {
            Mat J = spec.step_jac_u(traj.states[i], traj.parameter);
            Eigen::PartialPivLU<Mat> lu(J);
            double rcond = std::abs(lu.determinant());
            if (!std::isfinite(rcond) || rcond < 1e-14)
                throw SingularJacobianError("propagate: step Jacobian at node " +
                                            std::to_string(i) + " is not invertible");
            v = lu.solve(v);
            guard_growth(v.norm(), "propagated vector", i);
        }
    }
    return v;
}

std::vector<int> ClvBasis::picked(const Pick& pick) const {
    const int m = static_cast<int>(exponents.size());
    auto is_neutral = [&](int j) { return neutral_index && *neutral_index == j; };
    std::vector<int> out;
    switch (pick.kind) {
        case Pick::Kind::single:
            if (pick.index < 0 || pick.index >= m)
                throw InvalidConfigError("projection index out of range");
            out.push_back(pick.index);
            break;
        case Pick::Kind::zero:
            if (!neutral_index)
                throw InvalidConfigError("neutral selection is only defined for flows");
            out.push_back(*neutral_index);
            break;
        case Pick::Kind::plus:
            for (int j = 0; j < m; ++j)
                if (!is_neutral(j) && exponents[j] > neutral_tolerance) out.push_back(j);
            break;
        case Pick::Kind::minus:
            for (int j = 0; j < m; ++j)
                if (!is_neutral(j) && exponents[j] <= neutral_tolerance) out.push_back(j);
            break;
        case Pick::Kind::plus_minus:
            for (int j = 0; j < m; ++j)
                if (!is_neutral(j)) out.push_back(j);
            break;
    }
    return out;
}

Vec project(const ClvBasis& clv, int k, const Pick& pick, const Vec& v) {
    if (k < 0 || k >= clv.points())
        throw InvalidConfigError("project: grid index out of range");
    const Mat& Z = clv.frames[k];
    Eigen::PartialPivLU<Mat> lu(Z);
    Vec coeff = lu.solve(v);
    Vec masked = Vec::Zero(v.size());
    for (int j : clv.picked(pick)) masked[j] = coeff[j];
    return Z * masked;
}

namespace {

Mat random_orthonormal(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat G(m, m);
    for (int c = 0; c < m; ++c)
        for (int r = 0; r < m; ++r) G(r, c) = gauss(rng);
    Eigen::HouseholderQR<Mat> qr(G);
    return qr.householderQ() * Mat::Identity(m, m);
}

Mat random_unit_upper_triangular(int m, std::mt19937_64& rng) {
    std::normal_distribution<double> gauss(0.0, 1.0);
    Mat C = Mat::Zero(m, m);
    for (int c = 0; c < m; ++c) {
        for (int r = 0; r <= c; ++r) C(r, c) = gauss(rng);
        C(c, c) = std::abs(C(c, c)) + 0.5; // keep the diagonal well away from zero
        C.col(c).normalize();
    }
    return C;
}

/// Backward coefficient sweep from grid point `from` down to `g0`.
/// Stores unit-column coefficients on [g0, keep_to] and per-interval log
/// growth factors on [g0, keep_to-1].
struct BackwardResult {
    std::vector<Mat> coeff; // index k - g0
    Mat log_growth;         // m x (keep_to - g0)
};

BackwardResult backward_pass(const std::vector<Mat>& R, int g0, int keep_to, int from,
                             int m, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    BackwardResult res;
    res.coeff.assign(keep_to - g0 + 1, Mat());
    res.log_growth = Mat::Zero(m, keep_to - g0);
    Mat C = random_unit_upper_triangular(m, rng);
    if (from == keep_to) res.coeff[from - g0] = C;
    for (int k = from - 1; k >= g0; --k) {
        Mat X = R[k].triangularView<Eigen::Upper>().solve(C);
        Mat Cnew(m, m);
        for (int j = 0; j < m; ++j) {
            double n = X.col(j).norm();
            if (!std::isfinite(n) || n == 0.0)
                throw NotConvergedError("backward pass produced a degenerate coefficient column");
            Cnew.col(j) = X.col(j) / n;
            if (k <= keep_to - 1) res.log_growth(j, k - g0) = -std::log(n);
        }
        C = Cnew;
        if (k <= keep_to) res.coeff[k - g0] = C;
    }
    return res;
}

double max_column_angle(const Mat& A, const Mat& B) {
    double worst = 0.0;
    for (int j = 0; j < A.cols(); ++j) {
        double c = std::min(1.0, std::abs(A.col(j).dot(B.col(j))));
        worst = std::max(worst, std::acos(c));
    }
    return worst;
}

/// Shared two-pass algorithm. advance(k, B) pushes the frame B across grid
/// interval k; the grid has `grid_count` intervals of duration grid_dt.
template <typename AdvanceFn>
ClvBasis compute_clvs_impl(const Trajectory& traj, const ClvOptions& opts, int m,
                           int stride, double grid_dt, bool is_flow,
                           const std::function<Vec(const Vec&)>& drift_at,
                           AdvanceFn&& advance) {
    const int N = traj.steps();
    if (N < stride) throw InvalidConfigError("trajectory shorter than one orthonormalization interval");
    const int Kt = N / stride;
    if (!(opts.transient_fraction > 0.0 && opts.transient_fraction < 0.45))
        throw InvalidConfigError("transient fraction must lie in (0, 0.45)");
    const int g0 = std::max(1, static_cast<int>(std::lround(opts.transient_fraction * Kt)));
    const int g1 = Kt - g0;
    if (g1 - g0 < 4)
        throw InvalidConfigError("trajectory too short: fewer than 4 interior grid intervals "
                                 "remain after discarding transients");

    std::mt19937_64 rng(opts.seed);

    // Forward pass: orthonormalize the pushed frame at every grid point,
    // keeping triangular factors everywhere and Q frames on the window.
    std::vector<Mat> R(Kt);
    std::vector<Mat> Qwin(g1 - g0 + 1);
    Mat Q = random_orthonormal(m, rng);
    for (int k = 0; k < Kt; ++k) {
        if (k >= g0 && k <= g1) Qwin[k - g0] = Q;
        Mat B = Q;
        advance(k, B);
        guard_growth(B.norm(), "covariant frame", k + 1);
        Eigen::HouseholderQR<Mat> qr(B);
        Mat Qn = qr.householderQ() * Mat::Identity(m, m);
        Mat Rn = qr.matrixQR().topRows(m).triangularView<Eigen::Upper>();
        for (int j = 0; j < m; ++j) {
            if (Rn(j, j) < 0.0) { // fix signs so the factorization is unique
                Qn.col(j) = -Qn.col(j);
                Rn.row(j) = -Rn.row(j);
            }
            if (Rn(j, j) == 0.0 || !std::isfinite(Rn(j, j)))
                throw NotConvergedError("frame collapsed during forward pass at grid point " +
                                        std::to_string(k + 1));
        }
        Q = Qn;
        R[k] = Rn;
    }
    if (g1 == Kt) Qwin[g1 - g0] = Q; // unreachable with transient_fraction > 0; kept for safety

    // Backward pass plus an independent restart: both must land on the same
    // directions at the window's far end or the tail is too short.
    BackwardResult probe = backward_pass(R, g1, g1, Kt, m, opts.seed + 1);
    BackwardResult main = backward_pass(R, g0, g1, Kt, m, opts.seed + 2);
    double angle = max_column_angle(probe.coeff[0], main.coeff[g1 - g0]);
    if (angle > opts.convergence_tol)
        throw NotConvergedError("backward coefficients from independent starts disagree by " +
                                std::to_string(angle) + " rad; lengthen the trajectory or "
                                "increase the transient fraction");

    ClvBasis clv;
    clv.stride = stride;
    clv.first_step = g0 * stride;
    clv.grid_dt = grid_dt;
    clv.frames.resize(g1 - g0 + 1);
    for (int k = g0; k <= g1; ++k) clv.frames[k - g0] = Qwin[k - g0] * main.coeff[k - g0];
    clv.log_growth = main.log_growth;

    const int K = g1 - g0; // window interval count
    Vec lambda(m);
    for (int j = 0; j < m; ++j)
        lambda[j] = clv.log_growth.row(j).sum() / (K * grid_dt);

    // Exponent-descending column order.
    std::vector<int> perm(m);
    std::iota(perm.begin(), perm.end(), 0);
    std::stable_sort(perm.begin(), perm.end(), [&](int a, int b) { return lambda[a] > lambda[b]; });
    Vec sorted(m);
    Mat growth_sorted(m, K);
    for (int j = 0; j < m; ++j) {
        sorted[j] = lambda[perm[j]];
        growth_sorted.row(j) = clv.log_growth.row(perm[j]);
    }
    for (Mat& Z : clv.frames) {
        Mat Zs(m, m);
        for (int j = 0; j < m; ++j) Zs.col(j) = Z.col(perm[j]);
        Z = Zs;
    }
    clv.exponents = sorted;
    clv.log_growth = growth_sorted;

    clv.neutral_tolerance = opts.neutral_tolerance > 0.0
        ? opts.neutral_tolerance
        : std::max(1e-3, 0.005 * (clv.exponents.maxCoeff() - clv.exponents.minCoeff()));

    if (is_flow) {
        // Direction nearest a zero exponent; ties resolved by alignment with
        // the drift sampled across the window.
        double best = std::abs(clv.exponents[0]);
        std::vector<int> candidates{0};
        for (int j = 1; j < m; ++j) {
            double a = std::abs(clv.exponents[j]);
            if (a < best - 1e-9) { best = a; candidates = {j}; }
            else if (a <= best + 1e-9) candidates.push_back(j);
        }
        int pick = candidates[0];
        if (candidates.size() > 1) {
            double best_align = -1.0;
            for (int j : candidates) {
                double align = 0.0;
                for (int k = 0; k <= K; k += std::max(1, K / 8)) {
                    Vec f = drift_at(traj.states[clv.traj_index(k)]);
                    double fn = f.norm();
                    if (fn > 0.0) align += std::abs(clv.frames[k].col(j).dot(f)) / fn;
                }
                if (align > best_align) { best_align = align; pick = j; }
            }
        }
        clv.neutral_index = pick;
        clv.has_zero_exponent = std::abs(clv.exponents[pick]) <= clv.neutral_tolerance;
    }

    int n_us = 0;
    for (int j = 0; j < m; ++j) {
        if (clv.neutral_index && *clv.neutral_index == j) continue;
        if (clv.exponents[j] > clv.neutral_tolerance) ++n_us;
    }
    clv.n_unstable = n_us;

    // Worst separation angle between any direction and the span of the rest;
    // for a unit-column frame, 1/||row_j(Z^{-1})|| is the sine of that angle.
    double min_sin = 1.0;
    for (int k = 0; k <= K; ++k) {
        const Mat& Z = clv.frames[k];
        Mat Zinv = Z.inverse();
        double cond = Z.norm() * Zinv.norm();
        if (!std::isfinite(cond) || cond > opts.condition_limit)
            throw IllConditionedError("covariant frame at grid point " + std::to_string(k) +
                                      " has condition " + std::to_string(cond) +
                                      "; directions are nearly tangent");
        for (int j = 0; j < m; ++j)
            min_sin = std::min(min_sin, 1.0 / Zinv.row(j).norm());
    }
    clv.min_angle = std::asin(std::min(1.0, min_sin));

    return clv;
}

} // namespace

ClvBasis compute_clvs(const SystemSpec& spec, const Trajectory& traj, const ClvOptions& opts) {
    if (traj.kind != Trajectory::Kind::flow)
        throw InvalidConfigError("compute_clvs: flow overload requires a flow trajectory");
    const int stride = opts.qr_stride > 0 ? opts.qr_stride : 10;
    const double s = traj.parameter;
    auto drift_at = [&spec, s](const Vec& u) { return spec.drift(u, s); };
    auto advance = [&](int k, Mat& B) {
        for (int sub = 0; sub < stride; ++sub) {
            Stages st = stages_for(spec, traj, k * stride + sub);
            B = rk4_tangent_forward(st, B);
        }
    };
    return compute_clvs_impl(traj, opts, spec.dim, stride, stride * traj.step, true,
                             drift_at, advance);
}

ClvBasis compute_clvs(const MapSpec& spec, const Trajectory& traj, const ClvOptions& opts) {
    if (traj.kind != Trajectory::Kind::map)
        throw InvalidConfigError("compute_clvs: map overload requires a map trajectory");
    const int stride = opts.qr_stride > 0 ? opts.qr_stride : 1;
    const double s = traj.parameter;
    auto advance = [&](int k, Mat& B) {
        for (int sub = 0; sub < stride; ++sub)
            B = spec.step_jac_u(traj.states[k * stride + sub], s) * B;
    };
    return compute_clvs_impl(traj, opts, spec.dim, stride, stride * 1.0, false,
                             nullptr, advance);
}

void ClvBasis::save(const std::string& prefix) const {
    nlohmann::ordered_json meta;
    meta["schema"] = 1;
    meta["stride"] = stride;
    meta["first_step"] = first_step;
    meta["grid_dt"] = grid_dt;
    meta["points"] = points();
    meta["dim"] = dim();
    meta["exponents"] = std::vector<double>(exponents.data(), exponents.data() + exponents.size());
    meta["n_unstable"] = n_unstable;
    if (neutral_index) meta["neutral_index"] = *neutral_index;
    else meta["neutral_index"] = nullptr;
    meta["has_zero_exponent"] = has_zero_exponent;
    meta["neutral_tolerance"] = neutral_tolerance;
    meta["min_angle"] = min_angle;
    std::ofstream mout(prefix + ".meta.json");
    if (!mout) throw InvalidConfigError("cannot write '" + prefix + ".meta.json'");
    mout << meta.dump(2) << "\n";

    std::ofstream bout(prefix + ".frames.bin", std::ios::binary);
    if (!bout) throw InvalidConfigError("cannot write '" + prefix + ".frames.bin'");
    const char magic[4] = {'C', 'L', 'V', '1'};
    bout.write(magic, 4);
    std::int32_t md = dim(), pts = points();
    bout.write(reinterpret_cast<const char*>(&md), 4);
    bout.write(reinterpret_cast<const char*>(&pts), 4);
    for (const Mat& Z : frames)
        bout.write(reinterpret_cast<const char*>(Z.data()), sizeof(double) * md * md);
    bout.write(reinterpret_cast<const char*>(log_growth.data()),
               sizeof(double) * log_growth.size());
}

ClvBasis ClvBasis::load(const std::string& prefix) {
    std::ifstream min(prefix + ".meta.json");
    if (!min) throw InvalidConfigError("cannot read '" + prefix + ".meta.json'");
    nlohmann::json meta = nlohmann::json::parse(min);
    ClvBasis clv;
    clv.stride = meta.at("stride").get<int>();
    clv.first_step = meta.at("first_step").get<int>();
    clv.grid_dt = meta.at("grid_dt").get<double>();
    std::vector<double> expo = meta.at("exponents").get<std::vector<double>>();
    clv.exponents = Eigen::Map<Vec>(expo.data(), static_cast<int>(expo.size()));
    clv.n_unstable = meta.at("n_unstable").get<int>();
    if (!meta.at("neutral_index").is_null())
        clv.neutral_index = meta.at("neutral_index").get<int>();
    clv.has_zero_exponent = meta.at("has_zero_exponent").get<bool>();
    clv.neutral_tolerance = meta.at("neutral_tolerance").get<double>();
    clv.min_angle = meta.at("min_angle").get<double>();
    const int pts = meta.at("points").get<int>();
    const int md = meta.at("dim").get<int>();

    std::ifstream bin(prefix + ".frames.bin", std::ios::binary);
    if (!bin) throw InvalidConfigError("cannot read '" + prefix + ".frames.bin'");
    char magic[4];
    bin.read(magic, 4);
    if (std::string(magic, 4) != "CLV1")
        throw InvalidConfigError("'" + prefix + ".frames.bin' is not a frame dump");
    std::int32_t fdim = 0, fpts = 0;
    bin.read(reinterpret_cast<char*>(&fdim), 4);
    bin.read(reinterpret_cast<char*>(&fpts), 4);
    if (fdim != md || fpts != pts)
        throw InvalidConfigError("frame dump shape disagrees with metadata");
    clv.frames.assign(pts, Mat(md, md));
    for (Mat& Z : clv.frames)
        bin.read(reinterpret_cast<char*>(Z.data()), sizeof(double) * md * md);
    clv.log_growth.resize(md, pts - 1);
    bin.read(reinterpret_cast<char*>(clv.log_growth.data()),
             sizeof(double) * clv.log_growth.size());
    if (!bin) throw InvalidConfigError("frame dump truncated");
    return clv;
}

} // namespace clvshadow
