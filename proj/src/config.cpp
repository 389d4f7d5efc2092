#include "clvshadow/config.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace clvshadow {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_commas(const std::string& s) {
    std::vector<std::string> out;
    std::string item;
    std::istringstream in(s);
    while (std::getline(in, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

} // namespace

KeyValueFile KeyValueFile::parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidConfigError("cannot open config file '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_text(buf.str(), path);
}

KeyValueFile KeyValueFile::parse_text(const std::string& text, const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        if (eq == std::string::npos)
            throw InvalidConfigError(origin + ":" + std::to_string(lineno) +
                                     ": expected 'key = value', got '" + line + "'");
        std::string key = trim(line.substr(0, eq));
        std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            throw InvalidConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (kv.values_.count(key))
            throw InvalidConfigError(origin + ":" + std::to_string(lineno) +
                                     ": duplicate key '" + key + "'");
        kv.values_[key] = value;
    }
    return kv;
}

bool KeyValueFile::has(const std::string& key) const { return values_.count(key) != 0; }

std::string KeyValueFile::raw(const std::string& key) {
    auto it = values_.find(key);
    if (it == values_.end())
        throw InvalidConfigError(origin_ + ": missing required key '" + key + "'");
    consumed_.insert(key);
    return it->second;
}

std::string KeyValueFile::get_string(const std::string& key) { return raw(key); }

std::string KeyValueFile::get_string(const std::string& key, const std::string& fallback) {
    return has(key) ? raw(key) : fallback;
}

double KeyValueFile::get_double(const std::string& key) {
    std::string v = raw(key);
    errno = 0;
    char* end = nullptr;
    double x = std::strtod(v.c_str(), &end);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw InvalidConfigError(origin_ + ": key '" + key + "' is not a number: '" + v + "'");
    return x;
}

double KeyValueFile::get_double(const std::string& key, double fallback) {
    return has(key) ? get_double(key) : fallback;
}

int KeyValueFile::get_int(const std::string& key, int fallback) {
    if (!has(key)) return fallback;
    double x = get_double(key);
    int i = static_cast<int>(x);
    if (static_cast<double>(i) != x)
        throw InvalidConfigError(origin_ + ": key '" + key + "' must be an integer");
    return i;
}

std::uint64_t KeyValueFile::get_u64(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    errno = 0;
    char* end = nullptr;
    unsigned long long x = std::strtoull(v.c_str(), &end, 10);
    if (errno != 0 || end == v.c_str() || *end != '\0')
        throw InvalidConfigError(origin_ + ": key '" + key +
                                 "' is not an unsigned integer: '" + v + "'");
    return static_cast<std::uint64_t>(x);
}

bool KeyValueFile::get_bool(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    std::string v = raw(key);
    std::transform(v.begin(), v.end(), v.begin(), ::tolower);
    if (v == "true" || v == "yes" || v == "on" || v == "1") return true;
    if (v == "false" || v == "no" || v == "off" || v == "0") return false;
    throw InvalidConfigError(origin_ + ": key '" + key + "' is not a boolean: '" + v + "'");
}

Vec KeyValueFile::get_vector(const std::string& key) {
    std::vector<std::string> parts = split_commas(raw(key));
    Vec out(static_cast<int>(parts.size()));
    for (int i = 0; i < out.size(); ++i) {
        errno = 0;
        char* end = nullptr;
        out[i] = std::strtod(parts[i].c_str(), &end);
        if (errno != 0 || end == parts[i].c_str() || *end != '\0')
            throw InvalidConfigError(origin_ + ": key '" + key +
                                     "' has a non-numeric component: '" + parts[i] + "'");
    }
    return out;
}

std::vector<std::string> KeyValueFile::get_list(const std::string& key) {
    return split_commas(raw(key));
}

void KeyValueFile::reject_unconsumed() const {
    std::vector<std::string> unknown;
    for (const auto& [key, value] : values_)
        if (!consumed_.count(key)) unknown.push_back(key);
    if (!unknown.empty()) {
        std::string msg = origin_ + ": unknown key";
        if (unknown.size() > 1) msg += "s";
        msg += ":";
        for (const auto& k : unknown) msg += " '" + k + "'";
        throw InvalidConfigError(msg);
    }
}

namespace {

ExperimentConfig build(KeyValueFile kv,
                       std::optional<std::uint64_t> seed_override,
                       std::optional<std::string> out_override,
                       std::optional<std::string> format_override) {
    ExperimentConfig cfg;
    cfg.system_name = kv.get_string("system.name");
    if (kv.has("system.parameter")) cfg.parameter = kv.get_double("system.parameter");

    if (kv.has("trajectory.u0")) cfg.u0 = kv.get_vector("trajectory.u0");
    cfg.sample_ic = kv.get_bool("trajectory.sample_ic", false);
    if (kv.has("trajectory.spinup")) cfg.spinup = kv.get_double("trajectory.spinup");
    cfg.horizon = kv.get_double("trajectory.horizon");
    if (kv.has("trajectory.step")) cfg.step = kv.get_double("trajectory.step");

    cfg.qr_stride = kv.get_int("clv.qr_stride", 0);
    cfg.transient_fraction = kv.get_double("clv.transient_fraction", 0.2);
    cfg.neutral_tolerance = kv.get_double("clv.neutral_tolerance", 0.0);
    cfg.convergence_tol = kv.get_double("clv.convergence_tol", 1e-7);
    cfg.condition_limit = kv.get_double("clv.condition_limit", 1e8);
    cfg.seed = kv.get_u64("seed", 1u);

    cfg.buffer = kv.get_int("shadowing.buffer", -1);
    cfg.truncation_tol = kv.get_double("shadowing.truncation_tol", 1e-6);

    if (kv.has("sensitivity.methods")) cfg.methods = kv.get_list("sensitivity.methods");
    if (kv.has("sensitivity.fd_ds")) cfg.fd_ds = kv.get_double("sensitivity.fd_ds");
    cfg.fd_horizon = kv.get_double("sensitivity.fd_horizon", 0.0);
    cfg.fd_ensemble = kv.get_int("sensitivity.fd_ensemble", 10);
    if (kv.has("sensitivity.fd_spinup")) cfg.fd_spinup = kv.get_double("sensitivity.fd_spinup");

    cfg.verify_samples = kv.get_int("verify.samples", 100);
    cfg.inject_fault = kv.get_bool("verify.inject_fault", false);
    cfg.fault_eps = kv.get_double("verify.fault_eps", 1e-6);

    cfg.out_dir = kv.get_string("output.directory", "out");
    cfg.format = kv.get_string("output.format", "json");
    cfg.save_frames = kv.get_bool("output.save_frames", false);

    kv.reject_unconsumed();

    if (seed_override) cfg.seed = *seed_override;
    if (out_override) cfg.out_dir = *out_override;
    if (format_override) cfg.format = *format_override;

    cfg.validate();
    return cfg;
}

} // namespace

ExperimentConfig ExperimentConfig::load(const std::string& path,
                                        std::optional<std::uint64_t> seed_override,
                                        std::optional<std::string> out_override,
                                        std::optional<std::string> format_override) {
    return build(KeyValueFile::parse_file(path), seed_override, out_override, format_override);
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text,
                                             std::optional<std::uint64_t> seed_override,
                                             std::optional<std::string> out_override,
                                             std::optional<std::string> format_override) {
    return build(KeyValueFile::parse_text(text), seed_override, out_override, format_override);
}

void ExperimentConfig::validate() const {
    if (!is_flow_name(system_name) && !is_map_name(system_name)) {
        std::string known;
        for (const auto& n : registered_names()) known += " " + n;
        throw InvalidConfigError("unknown system '" + system_name + "'; known:" + known);
    }
    const bool flow = is_flow_name(system_name);
    if (!(horizon > 0.0))
        throw InvalidConfigError("trajectory.horizon must be positive");
    if (spinup && *spinup < 0.0)
        throw InvalidConfigError("trajectory.spinup must be nonnegative");
    if (step) {
        if (!flow) throw InvalidConfigError("trajectory.step applies to flows only");
        if (!(*step > 0.0)) throw InvalidConfigError("trajectory.step must be positive");
    }
    if (!(transient_fraction > 0.0 && transient_fraction < 0.45))
        throw InvalidConfigError("clv.transient_fraction must lie in (0, 0.45)");
    if (qr_stride < 0) throw InvalidConfigError("clv.qr_stride must be nonnegative");
    if (neutral_tolerance < 0.0)
        throw InvalidConfigError("clv.neutral_tolerance must be nonnegative");
    if (!(convergence_tol > 0.0))
        throw InvalidConfigError("clv.convergence_tol must be positive");
    if (buffer < -1) throw InvalidConfigError("shadowing.buffer must be -1, 0, or positive");
    if (!(truncation_tol > 0.0))
        throw InvalidConfigError("shadowing.truncation_tol must be positive");
    for (const auto& m : methods) {
        if (m != "tangent" && m != "adjoint" && m != "finite-difference" &&
            m != "tangent-flow" && m != "adjoint-flow" &&
            m != "tangent-map" && m != "adjoint-map")
            throw InvalidConfigError("unknown sensitivity method '" + m + "'");
        if (flow && (m == "tangent-map" || m == "adjoint-map"))
            throw InvalidConfigError("method '" + m + "' does not apply to a flow");
        if (!flow && (m == "tangent-flow" || m == "adjoint-flow"))
            throw InvalidConfigError("method '" + m + "' does not apply to a map");
    }
    if (fd_ds && !(*fd_ds > 0.0))
        throw InvalidConfigError("sensitivity.fd_ds must be positive");
    if (fd_horizon < 0.0)
        throw InvalidConfigError("sensitivity.fd_horizon must be nonnegative");
    if (fd_ensemble < 1)
        throw InvalidConfigError("sensitivity.fd_ensemble must be at least 1");
    if (verify_samples < 1)
        throw InvalidConfigError("verify.samples must be at least 1");
    if (!(fault_eps > 0.0))
        throw InvalidConfigError("verify.fault_eps must be positive");
    if (format != "json" && format != "csv")
        throw InvalidConfigError("output.format must be 'json' or 'csv'");
    if (out_dir.empty()) throw InvalidConfigError("output.directory must not be empty");
}

} // namespace clvshadow
