#include "clvshadow/commands.hpp"

#include "json.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>

namespace clvshadow {

namespace {

using ordered_json = nlohmann::ordered_json;

struct Pipeline {
    bool flow = false;
    FlowEntry fe;
    MapEntry me;
    double s = 0.0;
    Trajectory traj;
    int dim() const { return flow ? fe.spec.dim : me.spec.dim; }
};

Pipeline build_pipeline(const ExperimentConfig& cfg) {
    Pipeline p;
    p.flow = is_flow_name(cfg.system_name);
    if (p.flow) {
        p.fe = flow_registry(cfg.system_name);
        const SystemDefaults& d = p.fe.defaults;
        p.s = cfg.parameter.value_or(d.parameter);
        double h = cfg.step.value_or(d.step);
        double burn = cfg.spinup.value_or(d.spinup);
        Vec u0 = d.u0;
        if (cfg.sample_ic) {
            std::mt19937_64 rng(cfg.seed);
            u0 = sample_initial_state(d, rng);
        }
        if (cfg.u0.size() > 0) u0 = cfg.u0;
        if (u0.size() != p.fe.spec.dim)
            throw InvalidConfigError("trajectory.u0 has dimension " +
                                     std::to_string(u0.size()) + ", system needs " +
                                     std::to_string(p.fe.spec.dim));
        int n = static_cast<int>(std::round(cfg.horizon / h));
        if (n < 1) throw InvalidConfigError("trajectory.horizon shorter than one step");
        p.traj = integrate(p.fe.spec, spinup(p.fe.spec, u0, p.s, burn, h), p.s, h, n);
        p.traj.spinup_discarded = burn;
    } else {
        p.me = map_registry(cfg.system_name);
        const SystemDefaults& d = p.me.defaults;
        p.s = cfg.parameter.value_or(d.parameter);
        int burn = static_cast<int>(std::round(cfg.spinup.value_or(d.spinup)));
        Vec u0 = d.u0;
        if (cfg.sample_ic) {
            std::mt19937_64 rng(cfg.seed);
            u0 = sample_initial_state(d, rng);
        }
        if (cfg.u0.size() > 0) u0 = cfg.u0;
        if (u0.size() != p.me.spec.dim)
            throw InvalidConfigError("trajectory.u0 has dimension " +
                                     std::to_string(u0.size()) + ", system needs " +
                                     std::to_string(p.me.spec.dim));
        int n = static_cast<int>(std::round(cfg.horizon));
        if (n < 1) throw InvalidConfigError("trajectory.horizon shorter than one step");
        p.traj = iterate(p.me.spec, spinup(p.me.spec, u0, p.s, burn), p.s, n);
        p.traj.spinup_discarded = burn;
    }
    return p;
}

ClvOptions clv_options(const ExperimentConfig& cfg) {
    ClvOptions o;
    o.qr_stride = cfg.qr_stride;
    o.transient_fraction = cfg.transient_fraction;
    o.neutral_tolerance = cfg.neutral_tolerance;
    o.seed = cfg.seed + 1;
    o.convergence_tol = cfg.convergence_tol;
    o.condition_limit = cfg.condition_limit;
    return o;
}

ShadowingOptions shadow_options(const ExperimentConfig& cfg) {
    ShadowingOptions o;
    o.buffer = cfg.buffer;
    o.truncation_tol = cfg.truncation_tol;
    return o;
}

FdOptions fd_options(const ExperimentConfig& cfg) {
    FdOptions o;
    if (cfg.fd_ds) o.ds = *cfg.fd_ds;
    o.horizon = cfg.fd_horizon > 0.0 ? cfg.fd_horizon : cfg.horizon;
    if (cfg.fd_spinup) o.spinup = *cfg.fd_spinup;
    if (cfg.step) o.step = *cfg.step;
    o.ensemble = cfg.fd_ensemble;
    o.seed = cfg.seed + 2;
    return o;
}

void write_json(const ExperimentConfig& cfg, const std::string& name, const ordered_json& j) {
    std::filesystem::create_directories(cfg.out_dir);
    std::string path = cfg.out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidConfigError("cannot write output file '" + path + "'");
    out << j.dump(2) << "\n";
}

std::ofstream open_csv(const ExperimentConfig& cfg, const std::string& name) {
    std::filesystem::create_directories(cfg.out_dir);
    std::string path = cfg.out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InvalidConfigError("cannot write output file '" + path + "'");
    out << std::setprecision(17);
    return out;
}

std::vector<double> to_std(const Vec& v) {
    return std::vector<double>(v.data(), v.data() + v.size());
}

ordered_json clv_summary(const ClvBasis& clv) {
    ordered_json j;
    j["grid_dt"] = clv.grid_dt;
    j["points"] = clv.points();
    j["exponents"] = to_std(clv.exponents);
    j["n_unstable"] = clv.n_unstable;
    if (clv.neutral_index) j["neutral_index"] = *clv.neutral_index;
    else j["neutral_index"] = nullptr;
    j["has_zero_exponent"] = clv.has_zero_exponent;
    j["neutral_tolerance"] = clv.neutral_tolerance;
    j["min_angle"] = clv.min_angle;
    return j;
}

ordered_json diagnostics_json(const ShadowingDiagnostics& d) {
    ordered_json j;
    j["residual"] = d.residual;
    j["residual_scale"] = d.residual_scale;
    j["unstable_at_start"] = d.unstable_at_start;
    j["sup_norm"] = d.sup_norm;
    j["growth_ratio"] = d.growth_ratio;
    j["f_pairing_avg"] = d.f_pairing_avg;
    j["f_pairing_pm_max"] = d.f_pairing_pm_max;
    return j;
}

double sup_norm(const std::vector<Vec>& vs) {
    double sup = 0.0;
    for (const Vec& v : vs) sup = std::max(sup, v.norm());
    return sup;
}

ordered_json record_json(const SensitivityResult& r) {
    ordered_json j;
    j["method"] = r.method;
    j["value"] = r.value;
    j["stderr"] = r.stderr_est;
    j["horizon"] = r.horizon;
    return j;
}

/// Qualify bare method names with the system kind and drop duplicates.
std::vector<std::string> normalize_methods(const std::vector<std::string>& methods, bool flow) {
    std::vector<std::string> out;
    for (std::string m : methods) {
        if (m == "tangent") m = flow ? "tangent-flow" : "tangent-map";
        if (m == "adjoint") m = flow ? "adjoint-flow" : "adjoint-map";
        if (std::find(out.begin(), out.end(), m) == out.end()) out.push_back(m);
    }
    return out;
}

} // namespace

int cmd_clv(const ExperimentConfig& cfg) {
    Pipeline p = build_pipeline(cfg);
    ClvBasis clv = p.flow ? compute_clvs(p.fe.spec, p.traj, clv_options(cfg))
                          : compute_clvs(p.me.spec, p.traj, clv_options(cfg));

    ordered_json j;
    j["schema"] = 1;
    j["command"] = "clv";
    j["system"] = cfg.system_name;
    j["parameter"] = p.s;
    j["horizon"] = cfg.horizon;
    j["clv"] = clv_summary(clv);
    write_json(cfg, "exponents.json", j);

    if (cfg.format == "csv") {
        auto out = open_csv(cfg, "exponents.csv");
        out << "index,exponent,neutral\n";
        for (int i = 0; i < clv.exponents.size(); ++i)
            out << i << "," << clv.exponents[i] << ","
                << (clv.neutral_index && *clv.neutral_index == i ? 1 : 0) << "\n";
    }
    if (cfg.save_frames) clv.save(cfg.out_dir + "/clv");
    return 0;
}

int cmd_shadow(const ExperimentConfig& cfg) {
    Pipeline p = build_pipeline(cfg);
    ordered_json j;
    j["schema"] = 1;
    j["command"] = "shadow";
    j["system"] = cfg.system_name;
    j["parameter"] = p.s;
    j["horizon"] = cfg.horizon;

    if (p.flow) {
        ClvBasis clv = compute_clvs(p.fe.spec, p.traj, clv_options(cfg));
        AdjointClvBasis adj = dual_basis(clv, p.traj, p.fe.spec);
        TangentShadowing ts = tangent_shadowing_flow(p.fe.spec, p.traj, clv, shadow_options(cfg));
        AdjointShadowing as =
            adjoint_shadowing_flow(p.fe.spec, p.traj, clv, adj, shadow_options(cfg));
        j["clv"] = clv_summary(clv);
        j["window"] = {{"first_grid", as.first_grid}, {"points", as.points()},
                       {"grid_dt", as.grid_dt}};
        j["j_mean"] = as.j_mean;
        j["tangent"] = {{"sup_norm", sup_norm(ts.v)}};
        j["adjoint"] = diagnostics_json(as.diagnostics);
        write_json(cfg, "shadow.json", j);
        if (cfg.format == "csv") {
            auto t = open_csv(cfg, "tangent_direction.csv");
            t << "t";
            for (int c = 0; c < p.dim(); ++c) t << ",v" << (c + 1);
            t << ",eta\n";
            for (int k = 0; k < ts.points(); ++k) {
                t << p.traj.time_of(clv.traj_index(ts.first_grid + k));
                for (int c = 0; c < p.dim(); ++c) t << "," << ts.v[k][c];
                t << "," << ts.eta[k] << "\n";
            }
            auto a = open_csv(cfg, "adjoint_direction.csv");
            a << "t";
            for (int c = 0; c < p.dim(); ++c) a << ",vbar" << (c + 1);
            a << "\n";
            for (int k = 0; k < as.points(); ++k) {
                a << p.traj.time_of(clv.traj_index(as.first_grid + k));
                for (int c = 0; c < p.dim(); ++c) a << "," << as.v[k][c];
                a << "\n";
            }
        }
        if (cfg.save_frames) clv.save(cfg.out_dir + "/clv");
    } else {
        ClvBasis clv = compute_clvs(p.me.spec, p.traj, clv_options(cfg));
        MapShadowing ts = tangent_shadowing_map(p.me.spec, p.traj, clv, shadow_options(cfg));
        MapShadowing as = adjoint_shadowing_map(p.me.spec, p.traj, clv, shadow_options(cfg));
        j["clv"] = clv_summary(clv);
        j["window"] = {{"first_grid", as.first_grid},
                       {"points", static_cast<int>(as.v_bar.size())}};
        j["j_mean"] = as.j_mean;
        j["tangent"] = {{"sup_norm", sup_norm(ts.v)}};
        j["adjoint"] = diagnostics_json(as.diagnostics);
        write_json(cfg, "shadow.json", j);
        if (cfg.format == "csv") {
            auto t = open_csv(cfg, "tangent_direction.csv");
            t << "step";
            for (int c = 0; c < p.dim(); ++c) t << ",v" << (c + 1);
            t << "\n";
            for (std::size_t k = 0; k < ts.v.size(); ++k) {
                t << clv.traj_index(ts.first_grid + static_cast<int>(k));
                for (int c = 0; c < p.dim(); ++c) t << "," << ts.v[k][c];
                t << "\n";
            }
            auto a = open_csv(cfg, "adjoint_direction.csv");
            a << "step";
            for (int c = 0; c < p.dim(); ++c) a << ",vbar" << (c + 1);
            a << "\n";
            for (std::size_t k = 0; k < as.v_bar.size(); ++k) {
                a << clv.traj_index(as.first_grid + static_cast<int>(k));
                for (int c = 0; c < p.dim(); ++c) a << "," << as.v_bar[k][c];
                a << "\n";
            }
        }
        if (cfg.save_frames) clv.save(cfg.out_dir + "/clv");
    }
    return 0;
}

int cmd_sens(const ExperimentConfig& cfg) {
    if (cfg.methods.empty()) {
        std::cerr << "nothing-to-do: sensitivity.methods is empty" << std::endl;
        return 2;
    }
    Pipeline p = build_pipeline(cfg);
    std::vector<std::string> methods = normalize_methods(cfg.methods, p.flow);

    bool need_tangent = false, need_adjoint = false;
    for (const auto& m : methods) {
        if (m == "tangent-flow" || m == "tangent-map") need_tangent = true;
        if (m == "adjoint-flow" || m == "adjoint-map") need_adjoint = true;
    }

    std::vector<SensitivityResult> records;
    if (p.flow) {
        ClvBasis clv;
        if (need_tangent || need_adjoint) clv = compute_clvs(p.fe.spec, p.traj, clv_options(cfg));
        for (const auto& m : methods) {
            if (m == "tangent-flow") {
                TangentShadowing ts =
                    tangent_shadowing_flow(p.fe.spec, p.traj, clv, shadow_options(cfg));
                records.push_back(sensitivity_tangent_flow(p.fe.spec, p.traj, clv, ts));
            } else if (m == "adjoint-flow") {
                AdjointClvBasis adj = dual_basis(clv, p.traj, p.fe.spec);
                AdjointShadowing as =
                    adjoint_shadowing_flow(p.fe.spec, p.traj, clv, adj, shadow_options(cfg));
                records.push_back(sensitivity_adjoint_flow(p.fe.spec, p.traj, clv, as));
            } else if (m == "finite-difference") {
                records.push_back(finite_difference_oracle(p.fe, p.s, fd_options(cfg)));
            }
        }
    } else {
        ClvBasis clv;
        if (need_tangent || need_adjoint) clv = compute_clvs(p.me.spec, p.traj, clv_options(cfg));
        for (const auto& m : methods) {
            if (m == "tangent-map") {
                MapShadowing ts =
                    tangent_shadowing_map(p.me.spec, p.traj, clv, shadow_options(cfg));
                records.push_back(sensitivity_tangent_map(p.me.spec, p.traj, clv, ts));
            } else if (m == "adjoint-map") {
                MapShadowing as =
                    adjoint_shadowing_map(p.me.spec, p.traj, clv, shadow_options(cfg));
                records.push_back(sensitivity_adjoint_map(p.me.spec, p.traj, clv, as));
            } else if (m == "finite-difference") {
                records.push_back(finite_difference_oracle(p.me, p.s, fd_options(cfg)));
            }
        }
    }
    ordered_json j;
    j["schema"] = 1;
    j["command"] = "sens";
    j["system"] = cfg.system_name;
    j["parameter"] = p.s;
    j["horizon"] = cfg.horizon;
    j["records"] = ordered_json::array();
    for (const auto& r : records) j["records"].push_back(record_json(r));
    j["comparison"] = ordered_json::array();
    for (std::size_t a = 0; a < records.size(); ++a) {
        for (std::size_t b = a + 1; b < records.size(); ++b) {
            double da = records[a].value, db = records[b].value;
            double abs_diff = std::abs(da - db);
            double rel_diff = abs_diff / std::max(std::max(std::abs(da), std::abs(db)), 1e-300);
            double comb = std::hypot(records[a].stderr_est, records[b].stderr_est);
            ordered_json row;
            row["a"] = records[a].method;
            row["b"] = records[b].method;
            row["value_a"] = da;
            row["value_b"] = db;
            row["abs_diff"] = abs_diff;
            row["rel_diff"] = rel_diff;
            row["combined_stderr"] = comb;
            row["within_two_stderr"] = abs_diff <= 2.0 * comb;
            j["comparison"].push_back(row);
        }
    }
    write_json(cfg, "sensitivity.json", j);

    if (cfg.format == "csv") {
        auto out = open_csv(cfg, "sensitivity.csv");
        out << "method,value,stderr,horizon\n";
        for (const auto& r : records)
            out << r.method << "," << r.value << "," << r.stderr_est << "," << r.horizon << "\n";
    }
    return 0;
}

int cmd_verify(const ExperimentConfig& cfg) {
    Pipeline p = build_pipeline(cfg);
    VerifyOptions vopts;
    vopts.samples = cfg.verify_samples;
    vopts.seed = cfg.seed + 3;

    // The checked boundary condition (no unstable component at the window
    // start) is imposed at the construction start, so verification always
    // runs on the untrimmed window.
    ShadowingOptions sopts = shadow_options(cfg);
    sopts.buffer = 0;

    std::vector<PropertyCheck> checks;
    if (p.flow) {
        ClvBasis clv = compute_clvs(p.fe.spec, p.traj, clv_options(cfg));
        AdjointClvBasis adj = dual_basis(clv, p.traj, p.fe.spec);
        AdjointShadowing shadow = adjoint_shadowing_flow(p.fe.spec, p.traj, clv, adj, sopts);
        if (cfg.inject_fault) {
            inject_unstable_fault(shadow, clv, adj, cfg.fault_eps);
            shadow.diagnostics = verify_properties(p.fe.spec, p.traj, clv, shadow);
        }
        checks = property_suite(p.fe.spec, p.traj, clv, adj, shadow, vopts);
    } else {
        ClvBasis clv = compute_clvs(p.me.spec, p.traj, clv_options(cfg));
        AdjointClvBasis adj = dual_basis(clv, p.traj, p.me.spec);
        MapShadowing shadow = adjoint_shadowing_map(p.me.spec, p.traj, clv, sopts);
        if (cfg.inject_fault) {
            inject_unstable_fault(shadow, clv, adj, cfg.fault_eps);
            shadow.diagnostics = verify_properties(p.me.spec, p.traj, clv, shadow);
        }
        checks = property_suite(p.me.spec, p.traj, clv, adj, shadow, vopts);
    }

    ordered_json j;
    j["schema"] = 1;
    j["command"] = "verify";
    j["system"] = cfg.system_name;
    j["parameter"] = p.s;
    j["horizon"] = cfg.horizon;
    j["samples"] = cfg.verify_samples;
    j["fault_injected"] = cfg.inject_fault;
    j["properties"] = ordered_json::array();
    for (const auto& c : checks) {
        ordered_json row;
        row["name"] = c.name;
        row["measured"] = c.measured;
        row["threshold"] = c.threshold;
        row["pass"] = c.pass;
        j["properties"].push_back(row);
    }
    j["all_pass"] = all_pass(checks);
    write_json(cfg, "verify.json", j);

    if (cfg.format == "csv") {
        auto out = open_csv(cfg, "verify.csv");
        out << "name,measured,threshold,pass\n";
        for (const auto& c : checks)
            out << c.name << "," << c.measured << "," << c.threshold << ","
                << (c.pass ? 1 : 0) << "\n";
    }
    return all_pass(checks) ? 0 : exit_code_for(ErrorCode::property_failure);
}

int cmd_fd(const ExperimentConfig& cfg) {
    // No trajectory needed: the oracle runs its own ensemble.
    const bool flow = is_flow_name(cfg.system_name);
    FdOptions opts = fd_options(cfg);
    double s;
    SensitivityResult r;
    if (flow) {
        const FlowEntry& e = flow_registry(cfg.system_name);
        s = cfg.parameter.value_or(e.defaults.parameter);
        r = finite_difference_oracle(e, s, opts);
    } else {
        const MapEntry& e = map_registry(cfg.system_name);
        s = cfg.parameter.value_or(e.defaults.parameter);
        r = finite_difference_oracle(e, s, opts);
    }
    ordered_json j;
    j["schema"] = 1;
    j["command"] = "fd";
    j["system"] = cfg.system_name;
    j["parameter"] = s;
    j["record"] = record_json(r);
    j["ensemble"] = opts.ensemble;
    write_json(cfg, "fd.json", j);
    return 0;
}

int dispatch(const std::string& command, const ExperimentConfig& cfg) {
    if (command == "clv") return cmd_clv(cfg);
    if (command == "shadow") return cmd_shadow(cfg);
    if (command == "sens") return cmd_sens(cfg);
    if (command == "verify") return cmd_verify(cfg);
    if (command == "fd") return cmd_fd(cfg);
    throw InvalidConfigError("unknown command '" + command + "'");
}

} // namespace clvshadow
