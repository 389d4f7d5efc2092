#include "clvshadow/dynamics.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace clvshadow {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

// Contracting eigenvector of [[2,1],[1,1]] (eigenvalue (3-sqrt(5))/2), unit norm.
constexpr double kCatEs0 = 0.52573111211913360603;
constexpr double kCatEs1 = -0.85065080835203993218;

bool finite(const Vec& u) { return u.allFinite(); }

Vec default_difference(const Vec& a, const Vec& b) { return a - b; }

template <typename F>
Mat central_jac_u(const F& f, const Vec& u, double s, double eps,
                  const std::function<Vec(const Vec&)>& wrap) {
    const int m = static_cast<int>(u.size());
    Vec fp = f(u, s);
    Mat J(fp.size(), m);
    for (int k = 0; k < m; ++k) {
        Vec up = u, um = u;
        up[k] += eps;
        um[k] -= eps;
        Vec diff = f(up, s) - f(um, s);
        if (wrap) diff = wrap(diff);
        J.col(k) = diff / (2.0 * eps);
    }
    return J;
}

template <typename F>
Vec central_jac_s(const F& f, const Vec& u, double s, double eps,
                  const std::function<Vec(const Vec&)>& wrap) {
    Vec diff = f(u, s + eps) - f(u, s - eps);
    if (wrap) diff = wrap(diff);
    return diff / (2.0 * eps);
}

double rel_err(double measured, double reference, double scale) {
    return std::abs(measured - reference) / std::max(scale, 1e-12);
}

} // namespace

void SystemSpec::finalize() {
    if (!drift || !objective)
        throw InvalidConfigError("system '" + name + "' needs drift and objective callbacks");
    const double eps = fd_eps;
    if (!drift_jac_u) {
        auto f = drift;
        drift_jac_u = [f, eps](const Vec& u, double s) {
            return central_jac_u(f, u, s, eps, nullptr);
        };
    }
    if (!drift_jac_s) {
        auto f = drift;
        drift_jac_s = [f, eps](const Vec& u, double s) {
            return central_jac_s(f, u, s, eps, nullptr);
        };
    }
    if (!objective_grad_u) {
        auto J = objective;
        objective_grad_u = [J, eps](const Vec& u, double s) {
            const int m = static_cast<int>(u.size());
            Vec g(m);
            for (int k = 0; k < m; ++k) {
                Vec up = u, um = u;
                up[k] += eps;
                um[k] -= eps;
                g[k] = (J(up, s) - J(um, s)) / (2.0 * eps);
            }
            return g;
        };
    }
    if (!objective_grad_s) {
        auto J = objective;
        objective_grad_s = [J, eps](const Vec& u, double s) {
            return (J(u, s + eps) - J(u, s - eps)) / (2.0 * eps);
        };
    }
}

void MapSpec::finalize() {
    if (!step || !objective)
        throw InvalidConfigError("map '" + name + "' needs step and objective callbacks");
    const double eps = fd_eps;
    auto wrap = wrap_difference;
    if (!step_jac_u) {
        auto f = step;
        step_jac_u = [f, eps, wrap](const Vec& u, double s) {
            return central_jac_u(f, u, s, eps, wrap);
        };
    }
    if (!step_jac_s) {
        auto f = step;
        step_jac_s = [f, eps, wrap](const Vec& u, double s) {
            return central_jac_s(f, u, s, eps, wrap);
        };
    }
    if (!objective_grad_u) {
        auto J = objective;
        objective_grad_u = [J, eps](const Vec& u, double s) {
            const int m = static_cast<int>(u.size());
            Vec g(m);
            for (int k = 0; k < m; ++k) {
                Vec up = u, um = u;
                up[k] += eps;
                um[k] -= eps;
                g[k] = (J(up, s) - J(um, s)) / (2.0 * eps);
            }
            return g;
        };
    }
    if (!objective_grad_s) {
        auto J = objective;
        objective_grad_s = [J, eps](const Vec& u, double s) {
            return (J(u, s + eps) - J(u, s - eps)) / (2.0 * eps);
        };
    }
}

static Vec rk4_step(const SystemSpec& spec, const Vec& u, double s, double h) {
    Vec k1 = spec.drift(u, s);
    Vec k2 = spec.drift(u + 0.5 * h * k1, s);
    Vec k3 = spec.drift(u + 0.5 * h * k2, s);
    Vec k4 = spec.drift(u + h * k3, s);
    return u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Trajectory integrate(const SystemSpec& spec, const Vec& u0, double s, double h, int n,
                     double divergence_bound) {
    if (n <= 0) throw InvalidConfigError("integrate: step count must be positive");
    if (!(h > 0.0)) throw InvalidConfigError("integrate: step size must be positive");
    if (u0.size() != spec.dim)
        throw InvalidConfigError("integrate: initial state dimension mismatch");

    Trajectory traj;
    traj.kind = Trajectory::Kind::flow;
    traj.step = h;
    traj.parameter = s;
    traj.states.reserve(n + 1);
    traj.states.push_back(u0);
    Vec u = u0;
    for (int i = 0; i < n; ++i) {
        u = rk4_step(spec, u, s, h);
        if (!finite(u) || u.norm() > divergence_bound)
            throw DivergenceError("integrate: state diverged at step " + std::to_string(i + 1) +
                                  " (t=" + std::to_string((i + 1) * h) + ")");
        traj.states.push_back(u);
    }
    return traj;
}

Trajectory iterate(const MapSpec& spec, const Vec& u0, double s, int n,
                   double divergence_bound) {
    if (n <= 0) throw InvalidConfigError("iterate: step count must be positive");
    if (u0.size() != spec.dim)
        throw InvalidConfigError("iterate: initial state dimension mismatch");

    Trajectory traj;
    traj.kind = Trajectory::Kind::map;
    traj.step = 1.0;
    traj.parameter = s;
    traj.states.reserve(n + 1);
    traj.states.push_back(u0);
    Vec u = u0;
    for (int i = 0; i < n; ++i) {
        u = spec.step(u, s);
        if (!finite(u) || u.norm() > divergence_bound)
            throw DivergenceError("iterate: state diverged at step " + std::to_string(i + 1));
        traj.states.push_back(u);
    }
    return traj;
}

Vec spinup(const SystemSpec& spec, const Vec& u0, double s, double duration, double h) {
    if (duration <= 0.0) return u0;
    int n = static_cast<int>(std::ceil(duration / h));
    Vec u = u0;
    for (int i = 0; i < n; ++i) {
        u = rk4_step(spec, u, s, h);
        if (!finite(u) || u.norm() > 1e8)
            throw DivergenceError("spinup: state diverged at t=" + std::to_string((i + 1) * h));
    }
    return u;
}

Vec spinup(const MapSpec& spec, const Vec& u0, double s, int steps) {
    Vec u = u0;
    for (int i = 0; i < steps; ++i) {
        u = spec.step(u, s);
        if (!finite(u) || u.norm() > 1e8)
            throw DivergenceError("spinup: state diverged at step " + std::to_string(i + 1));
    }
    return u;
}

double average_objective(const SystemSpec& spec, const Vec& u0, double s, double h, int n,
                         double divergence_bound) {
    if (n <= 0) throw InvalidConfigError("average_objective: step count must be positive");
    Vec u = u0;
    double acc = 0.5 * spec.objective(u, s);
    for (int i = 0; i < n; ++i) {
        u = rk4_step(spec, u, s, h);
        if (!finite(u) || u.norm() > divergence_bound)
            throw DivergenceError("average_objective: state diverged at t=" +
                                  std::to_string((i + 1) * h));
        acc += (i + 1 == n ? 0.5 : 1.0) * spec.objective(u, s);
    }
    return acc / n;
}

double average_objective(const MapSpec& spec, const Vec& u0, double s, int n,
                         double divergence_bound) {
    if (n <= 0) throw InvalidConfigError("average_objective: step count must be positive");
    Vec u = u0;
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
        acc += spec.objective(u, s);
        u = spec.step(u, s);
        if (!finite(u) || u.norm() > divergence_bound)
            throw DivergenceError("average_objective: state diverged at step " +
                                  std::to_string(i + 1));
    }
    return acc / n;
}

double DerivativeReport::max() const {
    return std::max(std::max(err_jac_u, err_jac_s), std::max(err_grad_u, err_grad_s));
}

namespace {

template <typename Spec, typename StepFn>
DerivativeReport check_impl(const Spec& spec, const StepFn& f,
                            const std::function<Mat(const Vec&, double)>& jac_u,
                            const std::function<Vec(const Vec&, double)>& jac_s,
                            const std::function<Vec(const Vec&)>& wrap,
                            const std::vector<Vec>& points, double s, double eps) {
    DerivativeReport rep;
    for (const Vec& u : points) {
        Mat Ju = jac_u(u, s);
        Mat Ju_fd = central_jac_u(f, u, s, eps, wrap);
        rep.err_jac_u = std::max(rep.err_jac_u,
                                 (Ju - Ju_fd).norm() / std::max(Ju.norm(), 1e-8));
        Vec Js = jac_s(u, s);
        Vec Js_fd = central_jac_s(f, u, s, eps, wrap);
        rep.err_jac_s = std::max(rep.err_jac_s,
                                 (Js - Js_fd).norm() / std::max(Js.norm(), 1e-8));
        Vec gu = spec.objective_grad_u(u, s);
        const int m = static_cast<int>(u.size());
        Vec gu_fd(m);
        for (int k = 0; k < m; ++k) {
            Vec up = u, um = u;
            up[k] += eps;
            um[k] -= eps;
            gu_fd[k] = (spec.objective(up, s) - spec.objective(um, s)) / (2.0 * eps);
        }
        rep.err_grad_u = std::max(rep.err_grad_u,
                                  (gu - gu_fd).norm() / std::max(gu.norm(), 1e-8));
        double gs = spec.objective_grad_s(u, s);
        double gs_fd = (spec.objective(u, s + eps) - spec.objective(u, s - eps)) / (2.0 * eps);
        rep.err_grad_s = std::max(rep.err_grad_s, rel_err(gs, gs_fd, std::abs(gs_fd)));
    }
    return rep;
}

} // namespace

DerivativeReport check_derivatives(const SystemSpec& spec, const std::vector<Vec>& points,
                                   double s, double eps) {
    return check_impl(spec, spec.drift, spec.drift_jac_u, spec.drift_jac_s, nullptr,
                      points, s, eps);
}

DerivativeReport check_derivatives(const MapSpec& spec, const std::vector<Vec>& points,
                                   double s, double eps) {
    return check_impl(spec, spec.step, spec.step_jac_u, spec.step_jac_s,
                      spec.wrap_difference, points, s, eps);
}

void Trajectory::save_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw InvalidConfigError("cannot open '" + path + "' for writing");
    out << std::setprecision(17);
    out << "t";
    for (int k = 0; k < dim(); ++k) out << ",u" << (k + 1);
    out << "\n";
    for (size_t i = 0; i < states.size(); ++i) {
        out << time_of(static_cast<int>(i));
        for (int k = 0; k < dim(); ++k) out << "," << states[i][k];
        out << "\n";
    }
}

Trajectory Trajectory::load_csv(const std::string& path, Kind kind, double parameter) {
    std::ifstream in(path);
    if (!in) throw InvalidConfigError("cannot open '" + path + "' for reading");
    Trajectory traj;
    traj.kind = kind;
    traj.parameter = parameter;
    std::string line;
    std::getline(in, line); // header
    double t0 = 0.0, t1 = 0.0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (row.size() < 2) throw InvalidConfigError("malformed row in '" + path + "'");
        if (traj.states.empty()) t0 = row[0];
        else if (traj.states.size() == 1) t1 = row[0];
        Vec u(row.size() - 1);
        for (size_t k = 1; k < row.size(); ++k) u[static_cast<int>(k - 1)] = row[k];
        traj.states.push_back(u);
    }
    if (traj.states.size() < 2) throw InvalidConfigError("trajectory in '" + path + "' too short");
    traj.step = t1 - t0;
    return traj;
}

// ---------------------------------------------------------------------------
// Built-in systems
// ---------------------------------------------------------------------------

namespace {

FlowEntry make_lorenz63() {
    const double sigma = 10.0;
    const double beta = 8.0 / 3.0;

    SystemSpec spec;
    spec.name = "lorenz63";
    spec.dim = 3;
    spec.drift = [sigma, beta](const Vec& u, double s) {
        Vec f(3);
        f[0] = sigma * (u[1] - u[0]);
        f[1] = u[0] * (s - u[2]) - u[1];
        f[2] = u[0] * u[1] - beta * u[2];
        return f;
    };
    spec.drift_jac_u = [sigma, beta](const Vec& u, double s) {
        Mat J(3, 3);
        J << -sigma, sigma, 0.0,
             s - u[2], -1.0, -u[0],
             u[1], u[0], -beta;
        return J;
    };
    spec.drift_jac_s = [](const Vec& u, double) {
        Vec g(3);
        g << 0.0, u[0], 0.0;
        return g;
    };
    spec.objective = [](const Vec& u, double) { return u[2]; };
    spec.objective_grad_u = [](const Vec&, double) {
        Vec g(3);
        g << 0.0, 0.0, 1.0;
        return g;
    };
    spec.objective_grad_s = [](const Vec&, double) { return 0.0; };

    FlowEntry entry;
    entry.spec = spec;
    entry.defaults.parameter = 28.0;
    entry.defaults.step = 0.005;
    entry.defaults.spinup = 100.0;
    entry.defaults.u0 = Vec(3);
    entry.defaults.u0 << 1.0, 1.0, 1.0;
    entry.defaults.ic_box_lo = Vec(3);
    entry.defaults.ic_box_lo << -10.0, -10.0, 10.0;
    entry.defaults.ic_box_hi = Vec(3);
    entry.defaults.ic_box_hi << 10.0, 10.0, 30.0;
    entry.defaults.fd_ds = 0.5;
    return entry;
}

FlowEntry make_linear_saddle() {
    // du1/dt = u1, du2/dt = -2 (u2 - s): constant Jacobian diag(1, -2),
    // fixed point (0, s). Closed forms make this the analytic oracle system.
    SystemSpec spec;
    spec.name = "linear-saddle";
    spec.dim = 2;
    spec.drift = [](const Vec& u, double s) {
        Vec f(2);
        f[0] = u[0];
        f[1] = -2.0 * (u[1] - s);
        return f;
    };
    spec.drift_jac_u = [](const Vec&, double) {
        Mat J(2, 2);
        J << 1.0, 0.0, 0.0, -2.0;
        return J;
    };
    spec.drift_jac_s = [](const Vec&, double) {
        Vec g(2);
        g << 0.0, 2.0;
        return g;
    };
    spec.objective = [](const Vec& u, double) { return u[1] * u[1]; };
    spec.objective_grad_u = [](const Vec& u, double) {
        Vec g(2);
        g << 0.0, 2.0 * u[1];
        return g;
    };
    spec.objective_grad_s = [](const Vec&, double) { return 0.0; };

    FlowEntry entry;
    entry.spec = spec;
    entry.defaults.parameter = 1.5;
    entry.defaults.step = 0.01;
    entry.defaults.spinup = 20.0;
    entry.defaults.u0 = Vec(2);
    entry.defaults.u0 << 0.0, 0.3;
    // The expanding coordinate is pinned to 0 so orbits stay bounded.
    entry.defaults.ic_box_lo = Vec(2);
    entry.defaults.ic_box_lo << 0.0, -1.0;
    entry.defaults.ic_box_hi = Vec(2);
    entry.defaults.ic_box_hi << 0.0, 1.0;
    entry.defaults.fd_ds = 0.1;
    return entry;
}

MapEntry make_catmap() {
    // u_{i+1} = M u_i + s g(u_i) mod 1 on the 2-torus with M = [[2,1],[1,1]]
    // and g(u) = cos(2pi(u1+u2))/(2pi) * e_s, where e_s is the contracting
    // eigenvector of M.  Aligning g with the contracting direction makes the
    // first-order response of the stationary average equal the bounded
    // shadowing displacement's contribution, with the closed form
    // d<J>/ds|_{s=0} = e_s[1]/4.  det(f_u) stays within 0.086 of 1 for
    // |s| <= 0.1, so the perturbed map remains a diffeomorphism there.
    MapSpec spec;
    spec.name = "catmap";
    spec.dim = 2;
    spec.step = [](const Vec& u, double s) {
        const double phi = std::cos(kTwoPi * (u[0] + u[1])) / kTwoPi;
        Vec v(2);
        v[0] = 2.0 * u[0] + u[1] + s * phi * kCatEs0;
        v[1] = u[0] + u[1] + s * phi * kCatEs1;
        v[0] -= std::floor(v[0]);
        v[1] -= std::floor(v[1]);
        return v;
    };
    spec.step_jac_u = [](const Vec& u, double s) {
        const double dphi = -std::sin(kTwoPi * (u[0] + u[1]));
        Mat J(2, 2);
        J << 2.0 + s * kCatEs0 * dphi, 1.0 + s * kCatEs0 * dphi,
             1.0 + s * kCatEs1 * dphi, 1.0 + s * kCatEs1 * dphi;
        return J;
    };
    spec.step_jac_s = [](const Vec& u, double) {
        const double phi = std::cos(kTwoPi * (u[0] + u[1])) / kTwoPi;
        Vec g(2);
        g << phi * kCatEs0, phi * kCatEs1;
        return g;
    };
    spec.objective = [](const Vec& u, double) {
        return std::cos(kTwoPi * u[0]) + 0.5 * std::sin(kTwoPi * u[1]);
    };
    spec.objective_grad_u = [](const Vec& u, double) {
        Vec g(2);
        g << -kTwoPi * std::sin(kTwoPi * u[0]), 0.5 * kTwoPi * std::cos(kTwoPi * u[1]);
        return g;
    };
    spec.objective_grad_s = [](const Vec&, double) { return 0.0; };
    spec.wrap_difference = [](const Vec& d) {
        Vec w(d.size());
        for (int k = 0; k < d.size(); ++k) w[k] = d[k] - std::round(d[k]);
        return w;
    };

    MapEntry entry;
    entry.spec = spec;
    entry.defaults.parameter = 0.05;
    entry.defaults.step = 1.0;
    entry.defaults.spinup = 1000;
    entry.defaults.u0 = Vec(2);
    entry.defaults.u0 << 0.2, 0.3;
    entry.defaults.ic_box_lo = Vec(2);
    entry.defaults.ic_box_lo << 0.0, 0.0;
    entry.defaults.ic_box_hi = Vec(2);
    entry.defaults.ic_box_hi << 1.0, 1.0;
    entry.defaults.fd_ds = 0.01;
    return entry;
}

std::map<std::string, FlowEntry> build_flows() {
    std::map<std::string, FlowEntry> reg;
    for (FlowEntry entry : {make_lorenz63(), make_linear_saddle()}) {
        entry.spec.finalize();
        reg.emplace(entry.spec.name, std::move(entry));
    }
    return reg;
}

std::map<std::string, MapEntry> build_maps() {
    std::map<std::string, MapEntry> reg;
    for (MapEntry entry : {make_catmap()}) {
        entry.spec.finalize();
        reg.emplace(entry.spec.name, std::move(entry));
    }
    return reg;
}

const std::map<std::string, FlowEntry>& flows() {
    static const std::map<std::string, FlowEntry> reg = build_flows();
    return reg;
}

const std::map<std::string, MapEntry>& maps() {
    static const std::map<std::string, MapEntry> reg = build_maps();
    return reg;
}

} // namespace

const FlowEntry& flow_registry(const std::string& name) {
    auto it = flows().find(name);
    if (it == flows().end())
        throw InvalidConfigError("unknown flow system '" + name + "'");
    return it->second;
}

const MapEntry& map_registry(const std::string& name) {
    auto it = maps().find(name);
    if (it == maps().end())
        throw InvalidConfigError("unknown map system '" + name + "'");
    return it->second;
}

bool is_flow_name(const std::string& name) { return flows().count(name) > 0; }
bool is_map_name(const std::string& name) { return maps().count(name) > 0; }

std::vector<std::string> registered_names() {
    std::vector<std::string> names;
    for (const auto& [k, v] : flows()) names.push_back(k);
    for (const auto& [k, v] : maps()) names.push_back(k);
    return names;
}

Vec sample_initial_state(const SystemDefaults& defaults, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vec u(defaults.ic_box_lo.size());
    for (int k = 0; k < u.size(); ++k) {
        double lo = defaults.ic_box_lo[k], hi = defaults.ic_box_hi[k];
        u[k] = lo + (hi - lo) * unif(rng);
    }
    return u;
}

} // namespace clvshadow
