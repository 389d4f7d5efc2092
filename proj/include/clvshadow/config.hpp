#pragma once

#include "clvshadow/dynamics.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace clvshadow {

/// Flat `key = value` file: one pair per line, `#` starts a comment, blank
/// lines ignored, keys are dotted paths (`system.name`). Duplicate keys and
/// keys that nothing consumed are errors, so typos cannot silently pass.
class KeyValueFile {
public:
    static KeyValueFile parse_file(const std::string& path);
    static KeyValueFile parse_text(const std::string& text, const std::string& origin = "<text>");

    bool has(const std::string& key) const;

    std::string get_string(const std::string& key);
    std::string get_string(const std::string& key, const std::string& fallback);
    double get_double(const std::string& key);
    double get_double(const std::string& key, double fallback);
    int get_int(const std::string& key, int fallback);
    std::uint64_t get_u64(const std::string& key, std::uint64_t fallback);
    bool get_bool(const std::string& key, bool fallback);
    /// Comma-separated doubles, e.g. `trajectory.u0 = 1, 1, 25`.
    Vec get_vector(const std::string& key);
    /// Comma-separated strings, e.g. `sensitivity.methods = adjoint, finite-difference`.
    std::vector<std::string> get_list(const std::string& key);

    /// Throws InvalidConfigError naming every key that was never read.
    void reject_unconsumed() const;

private:
    std::string raw(const std::string& key);
    std::string origin_;
    std::map<std::string, std::string> values_;
    std::set<std::string> consumed_;
};

/// Everything one CLI run needs; unset optionals fall back to the registry
/// defaults of the chosen system.
struct ExperimentConfig {
    std::string system_name;
    std::optional<double> parameter;

    Vec u0;                     ///< empty: defaults.u0, or sampled when sample_ic
    bool sample_ic = false;
    std::optional<double> spinup;
    double horizon = 0.0;       ///< time for flows, steps for maps; required
    std::optional<double> step; ///< flows only

    int qr_stride = 0;          ///< 0: per-kind default
    double transient_fraction = 0.2;
    double neutral_tolerance = 0.0;
    double convergence_tol = 1e-7;
    double condition_limit = 1e8;
    std::uint64_t seed = 1u;    ///< master seed; sub-stages derive from it

    int buffer = -1;            ///< -1 auto, 0 untrimmed window
    double truncation_tol = 1e-6;

    std::vector<std::string> methods; ///< sens: tangent/adjoint/finite-difference
    std::optional<double> fd_ds;
    double fd_horizon = 0.0;    ///< 0: reuse `horizon`
    int fd_ensemble = 10;
    std::optional<double> fd_spinup;

    int verify_samples = 100;
    bool inject_fault = false;
    double fault_eps = 1e-6;

    std::string out_dir = "out";
    std::string format = "json";    ///< json | csv (csv adds array dumps)
    bool save_frames = false;

    /// Parse + validate; rejects unknown keys. The optional overrides come
    /// from the command line and win over file values.
    static ExperimentConfig load(const std::string& path,
                                 std::optional<std::uint64_t> seed_override = {},
                                 std::optional<std::string> out_override = {},
                                 std::optional<std::string> format_override = {});
    static ExperimentConfig from_text(const std::string& text,
                                      std::optional<std::uint64_t> seed_override = {},
                                      std::optional<std::string> out_override = {},
                                      std::optional<std::string> format_override = {});

    void validate() const; ///< throws InvalidConfigError on bad values
};

} // namespace clvshadow
