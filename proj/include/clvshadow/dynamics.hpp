#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "clvshadow/errors.hpp"

namespace clvshadow {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Continuous-time system du/dt = f(u, s) with scalar objective J(u, s).
/// All callbacks must be pure. Missing derivative callbacks can be filled
/// with central-difference fallbacks via finalize().
struct SystemSpec {
    std::string name;
    int dim = 0;

    std::function<Vec(const Vec&, double)> drift;             // f(u, s)
    std::function<double(const Vec&, double)> objective;      // J(u, s)
    std::function<Mat(const Vec&, double)> drift_jac_u;       // f_u, dim x dim
    std::function<Vec(const Vec&, double)> drift_jac_s;       // f_s
    std::function<Vec(const Vec&, double)> objective_grad_u;  // J_u
    std::function<double(const Vec&, double)> objective_grad_s; // J_s

    /// Step size used by the finite-difference fallbacks.
    double fd_eps = 1e-6;

    /// Fill any missing derivative callback with a central-difference
    /// stencil built from drift/objective. Requires drift and objective.
    void finalize();
};

/// Discrete-time system u_{i+1} = f(u_i, s) with scalar objective J(u, s).
struct MapSpec {
    std::string name;
    int dim = 0;

    std::function<Vec(const Vec&, double)> step;              // f(u, s)
    std::function<double(const Vec&, double)> objective;      // J(u, s)
    std::function<Mat(const Vec&, double)> step_jac_u;        // f_u
    std::function<Vec(const Vec&, double)> step_jac_s;        // f_s
    std::function<Vec(const Vec&, double)> objective_grad_u;  // J_u
    std::function<double(const Vec&, double)> objective_grad_s; // J_s

    /// Reduces a state difference; torus maps wrap it to the nearest image
    /// so finite differences are valid across the periodic seam.
    std::function<Vec(const Vec&)> wrap_difference;

    double fd_eps = 1e-6;

    void finalize();
};

/// Orbit sample of either a flow (step = integrator step h) or a map (step = 1).
struct Trajectory {
    enum class Kind { flow, map };

    Kind kind = Kind::flow;
    double step = 0.0;       ///< time per stored state increment
    double parameter = 0.0;  ///< s at which the orbit was generated
    double spinup_discarded = 0.0; ///< time (flows) or steps (maps) dropped before states[0]
    std::vector<Vec> states; ///< states[i] at time i * step

    int steps() const { return static_cast<int>(states.size()) - 1; }
    int dim() const { return states.empty() ? 0 : static_cast<int>(states[0].size()); }
    double time_of(int i) const { return i * step; }
    double span() const { return steps() * step; }

    /// One row per state: t, u_1..u_m. Comma separated, full precision.
    void save_csv(const std::string& path) const;
    static Trajectory load_csv(const std::string& path, Kind kind, double parameter);
};

/// Classical fixed-step RK4 over n steps of size h starting at u0.
/// Throws DivergenceError if a state stops being finite or exceeds bound.
Trajectory integrate(const SystemSpec& spec, const Vec& u0, double s, double h, int n,
                     double divergence_bound = 1e8);

/// Iterate a map n steps. Bit-reproducible for identical (u0, s, n).
Trajectory iterate(const MapSpec& spec, const Vec& u0, double s, int n,
                   double divergence_bound = 1e8);

/// Run the dynamics for `duration` (time for flows, steps for maps) and
/// return the final state; used to land on the attractor before sampling.
Vec spinup(const SystemSpec& spec, const Vec& u0, double s, double duration, double h);
Vec spinup(const MapSpec& spec, const Vec& u0, double s, int steps);

/// Time average of the objective over n steps without storing the orbit:
/// trapezoid rule for flows, plain mean over the first n states for maps.
double average_objective(const SystemSpec& spec, const Vec& u0, double s, double h, int n,
                         double divergence_bound = 1e8);
double average_objective(const MapSpec& spec, const Vec& u0, double s, int n,
                         double divergence_bound = 1e8);

/// Max relative error of each analytic derivative callback against a
/// central-difference stencil of spacing eps at the supplied points.
struct DerivativeReport {
    double err_jac_u = 0.0;
    double err_jac_s = 0.0;
    double err_grad_u = 0.0;
    double err_grad_s = 0.0;
    double max() const;
};

DerivativeReport check_derivatives(const SystemSpec& spec, const std::vector<Vec>& points,
                                   double s, double eps = 1e-5);
DerivativeReport check_derivatives(const MapSpec& spec, const std::vector<Vec>& points,
                                   double s, double eps = 1e-5);

/// Defaults a registry entry carries so the CLI can run a system end to end.
struct SystemDefaults {
    double parameter = 0.0;  ///< nominal s
    double step = 0.0;       ///< integrator step (flows), 1 for maps
    double spinup = 0.0;     ///< default spin-up duration
    Vec u0;                  ///< canonical initial state
    Vec ic_box_lo, ic_box_hi; ///< componentwise box for random initial states
    double fd_ds = 0.0;      ///< default central-difference parameter offset
};

struct FlowEntry {
    SystemSpec spec;
    SystemDefaults defaults;
};
struct MapEntry {
    MapSpec spec;
    SystemDefaults defaults;
};

/// Built-in systems, looked up by name. Throws InvalidConfigError for
/// unknown names; flow and map namespaces are disjoint.
const FlowEntry& flow_registry(const std::string& name);
const MapEntry& map_registry(const std::string& name);
bool is_flow_name(const std::string& name);
bool is_map_name(const std::string& name);
std::vector<std::string> registered_names();

/// Uniform sample from the entry's initial-condition box.
Vec sample_initial_state(const SystemDefaults& defaults, std::mt19937_64& rng);

} // namespace clvshadow
