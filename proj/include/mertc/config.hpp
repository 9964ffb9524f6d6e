#pragma once

// Run configuration for the command-line tool: a flat "key = value" text
// format where every key has a default, '#' starts a comment, and list
// values are comma separated. Overrides use the same key names.

#include <charconv>
#include <cstdint>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mertc/error.hpp"
#include "mertc/montecarlo.hpp"
#include "mertc/problem.hpp"

namespace mertc {

enum class SweepAxis { cost, theta, lambda, mu };

[[nodiscard]] inline std::string_view to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::cost: return "cost";
        case SweepAxis::theta: return "theta";
        case SweepAxis::lambda: return "lambda";
        case SweepAxis::mu: return "mu";
    }
    return "?";
}

struct SweepConfig {
    SweepAxis axis = SweepAxis::cost;  ///< cost sets lambda = mu
    std::vector<double> values{0.001, 0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5};
    double time = 0.25;  ///< slice reported in the figure tables
};

struct RunConfig {
    ProblemSpec spec;
    SweepConfig sweep;
    SimConfig sim;
    bool perturb = false;
    std::vector<double> shifts{-0.2, -0.1, 0.0, 0.1, 0.2};
    bool dump_paths = false;
    std::string out = "out";
    bool cache = true;
    int workers = 1;
    std::string profile = "default";

    RunConfig() {
        spec.params.utility = UtilitySpec::log();
        sim.seed = 20240601;
    }
};

namespace config_detail {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline double parse_double(std::string_view key, std::string_view text) {
    const auto s = trim(text);
    double v = 0.0;
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) {
        throw config_error(std::string(key) + ": expected a number, got '" + s + "'");
    }
    return v;
}

template <class Int>
Int parse_int(std::string_view key, std::string_view text) {
    const auto s = trim(text);
    Int v{};
    const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || end != s.data() + s.size() || s.empty()) {
        throw config_error(std::string(key) + ": expected an integer, got '" + s + "'");
    }
    return v;
}

inline bool parse_bool(std::string_view key, std::string_view text) {
    const auto s = trim(text);
    if (s == "true" || s == "yes" || s == "1" || s == "on") return true;
    if (s == "false" || s == "no" || s == "0" || s == "off") return false;
    throw config_error(std::string(key) + ": expected true or false, got '" + s + "'");
}

inline std::vector<double> parse_list(std::string_view key, std::string_view text) {
    std::vector<double> out;
    std::string item;
    std::istringstream is{std::string(text)};
    while (std::getline(is, item, ',')) out.push_back(parse_double(key, item));
    if (out.empty()) throw config_error(std::string(key) + ": empty list");
    return out;
}

inline std::string show(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string show(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + show(v[i]);
    return s;
}

struct Key {
    std::string_view name;
    std::function<void(RunConfig&, std::string_view)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define MERTC_DOUBLE_KEY(name, member)                                                        \
    Key {                                                                                     \
        name, [](RunConfig& c, std::string_view v) { c.member = parse_double(name, v); },   \
            [](const RunConfig& c) { return show(c.member); }                                 \
    }
#define MERTC_INT_KEY(name, member)                                                                  \
    Key {                                                                                            \
        name, [](RunConfig& c, std::string_view v) { c.member = parse_int<decltype(c.member)>(name, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                              \
    }
#define MERTC_BOOL_KEY(name, member)                                                      \
    Key {                                                                                 \
        name, [](RunConfig& c, std::string_view v) { c.member = parse_bool(name, v); }, \
            [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }   \
    }

inline Variant parse_problem(std::string_view v) {
    const auto s = trim(v);
    if (s == "log") return Variant::log_consumption_hat;
    if (s == "crra") return Variant::crra_no_consumption;
    if (s == "stationary") return Variant::infinite_horizon_log;
    throw config_error("problem: expected log, crra or stationary, got '" + s + "'");
}

inline std::string_view problem_name(Variant v) {
    switch (v) {
        case Variant::log_consumption_hat: return "log";
        case Variant::crra_no_consumption: return "crra";
        case Variant::infinite_horizon_log: return "stationary";
    }
    return "?";
}

inline SweepAxis parse_axis(std::string_view v) {
    const auto s = trim(v);
    for (auto a : {SweepAxis::cost, SweepAxis::theta, SweepAxis::lambda, SweepAxis::mu}) {
        if (s == to_string(a)) return a;
    }
    throw config_error("sweep.axis: expected cost, theta, lambda or mu, got '" + s + "'");
}

inline const std::vector<Key>& keys() {
    static const std::vector<Key> table{
        Key{"problem",
            [](RunConfig& c, std::string_view v) {
                c.spec.variant = parse_problem(v);
                c.spec.params.utility = c.spec.variant == Variant::crra_no_consumption
                                            ? UtilitySpec::crra(c.spec.params.utility.gamma != 0.0
                                                                    ? c.spec.params.utility.gamma
                                                                    : -1.0)
                                            : UtilitySpec::log();
            },
            [](const RunConfig& c) { return std::string(problem_name(c.spec.variant)); }},
        Key{"gamma",
            [](RunConfig& c, std::string_view v) { c.spec.params.utility.gamma = parse_double("gamma", v); },
            [](const RunConfig& c) { return show(c.spec.params.utility.gamma); }},
        MERTC_DOUBLE_KEY("alpha", spec.params.market.alpha),
        MERTC_DOUBLE_KEY("r", spec.params.market.r),
        MERTC_DOUBLE_KEY("sigma", spec.params.market.sigma),
        MERTC_DOUBLE_KEY("beta", spec.params.market.beta),
        MERTC_DOUBLE_KEY("T", spec.params.market.T),
        MERTC_DOUBLE_KEY("lambda", spec.params.costs.lambda),
        MERTC_DOUBLE_KEY("mu", spec.params.costs.mu),
        MERTC_DOUBLE_KEY("grid.x_min", spec.grid.x_min),
        MERTC_DOUBLE_KEY("grid.x_max", spec.grid.x_max),
        MERTC_INT_KEY("grid.n_space", spec.grid.n_space),
        MERTC_INT_KEY("grid.n_time", spec.grid.n_time),
        MERTC_DOUBLE_KEY("solver.omega", spec.solver.psor_relaxation),
        MERTC_DOUBLE_KEY("solver.psor_tol", spec.solver.psor_tol),
        MERTC_INT_KEY("solver.psor_max_iter", spec.solver.psor_max_iter),
        MERTC_DOUBLE_KEY("solver.picard_tol", spec.solver.picard_tol),
        MERTC_INT_KEY("solver.picard_max_iter", spec.solver.picard_max_iter),
        MERTC_DOUBLE_KEY("solver.steady_state_tol", spec.solver.steady_state_tol),
        MERTC_INT_KEY("solver.steady_state_max_steps", spec.solver.steady_state_max_steps),
        Key{"sweep.axis", [](RunConfig& c, std::string_view v) { c.sweep.axis = parse_axis(v); },
            [](const RunConfig& c) { return std::string(to_string(c.sweep.axis)); }},
        Key{"sweep.values", [](RunConfig& c, std::string_view v) { c.sweep.values = parse_list("sweep.values", v); },
            [](const RunConfig& c) { return show(c.sweep.values); }},
        MERTC_DOUBLE_KEY("sweep.time", sweep.time),
        MERTC_INT_KEY("sim.paths", sim.n_paths),
        MERTC_INT_KEY("sim.steps", sim.n_steps),
        MERTC_INT_KEY("sim.seed", sim.seed),
        MERTC_DOUBLE_KEY("sim.x0", sim.x0),
        MERTC_DOUBLE_KEY("sim.y0", sim.y0),
        MERTC_BOOL_KEY("sim.perturb", perturb),
        Key{"sim.shifts", [](RunConfig& c, std::string_view v) { c.shifts = parse_list("sim.shifts", v); },
            [](const RunConfig& c) { return show(c.shifts); }},
        MERTC_BOOL_KEY("sim.dump_paths", dump_paths),
        Key{"out", [](RunConfig& c, std::string_view v) { c.out = trim(v); },
            [](const RunConfig& c) { return c.out; }},
        MERTC_BOOL_KEY("cache", cache),
        MERTC_INT_KEY("workers", workers),
        Key{"profile", [](RunConfig& c, std::string_view v) { c.profile = trim(v); },
            [](const RunConfig& c) { return c.profile; }},
    };
    return table;
}

#undef MERTC_DOUBLE_KEY
#undef MERTC_INT_KEY
#undef MERTC_BOOL_KEY

}  // namespace config_detail

/// Sets one key; unknown keys are configuration errors.
inline void apply_setting(RunConfig& c, std::string_view key, std::string_view value) {
    for (const auto& k : config_detail::keys()) {
        if (k.name == key) {
            k.set(c, value);
            return;
        }
    }
    throw config_error("unknown config key '" + std::string(key) + "'");
}

/// Applies a "key=value" override.
inline void apply_override(RunConfig& c, std::string_view assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string_view::npos) throw config_error("override '" + std::string(assignment) + "' lacks '='");
    apply_setting(c, config_detail::trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

inline void apply_text(RunConfig& c, std::string_view text, std::string_view source = "config") {
    std::istringstream is{std::string(text)};
    std::string line;
    int number = 0;
    while (std::getline(is, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        const auto body = config_detail::trim(line);
        if (body.empty()) continue;
        const auto eq = body.find('=');
        if (eq == std::string::npos) {
            throw config_error(std::string(source) + ":" + std::to_string(number) + ": expected key = value");
        }
        try {
            apply_setting(c, config_detail::trim(std::string_view(body).substr(0, eq)),
                          std::string_view(body).substr(eq + 1));
        } catch (const Error& e) {
            throw config_error(std::string(source) + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

inline void apply_file(RunConfig& c, const std::string& path) {
    std::ifstream is(path);
    if (!is) throw config_error("cannot read config file " + path);
    std::stringstream buf;
    buf << is.rdbuf();
    apply_text(c, buf.str(), path);
}

/// Every key with its current value, one "key = value" line each, in a fixed
/// order. Parsing the output reproduces the configuration.
/// Keys that change where and how fast a run happens but not what it computes.
[[nodiscard]] inline bool is_run_only_key(std::string_view name) {
    return name == "out" || name == "cache" || name == "workers";
}

[[nodiscard]] inline std::string canonical_text(const RunConfig& c, bool run_only_keys = true) {
    std::string s;
    for (const auto& k : config_detail::keys()) {
        if (!run_only_keys && is_run_only_key(k.name)) continue;
        s += std::string(k.name) + " = " + k.get(c) + "\n";
    }
    return s;
}

/// Hash of the result-relevant settings; output directory, cache use and
/// worker count are left out so identical computations share a hash.
[[nodiscard]] inline std::string config_hash(const RunConfig& c) { return hex64(fnv1a(canonical_text(c, false))); }

/// Validation of everything a subcommand may use.
[[nodiscard]] inline std::vector<Violation> validate(const RunConfig& c) {
    auto out = validate(c.spec);
    if (c.spec.variant == Variant::crra_no_consumption) {
        if (c.spec.params.utility.kind != UtilityKind::crra_no_consumption) {
            out.push_back({"gamma", "crra problem needs a CRRA utility"});
        }
    }
    if (c.workers < 1) out.push_back({"workers", "at least one worker required"});
    if (c.out.empty()) out.push_back({"out", "output directory required"});
    if (!(c.sweep.time >= 0.0 && c.sweep.time < c.spec.params.market.T)) {
        out.push_back({"sweep.time", "sweep.time must lie in [0, T)"});
    }
    for (const auto& v : validate(c.sim, c.spec.params.costs)) out.push_back(v);
    return out;
}

inline void require_valid(const RunConfig& c) {
    const auto v = validate(c);
    if (v.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& e : v) msg += "\n  " + e.field + ": " + e.message;
    throw config_error(msg);
}

}  // namespace mertc
