#pragma once

// JSON and CSV emission for command-line runs. Non-finite numbers are written
// as the strings "inf", "-inf" and "nan" since JSON has no literal for them.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mertc/analysis.hpp"
#include "mertc/config.hpp"
#include "mertc/invariants.hpp"
#include "mertc/montecarlo.hpp"
#include "mertc/verify.hpp"

namespace mertc {

using json = nlohmann::ordered_json;

[[nodiscard]] inline json number(double v) {
    if (std::isfinite(v)) return v;
    if (std::isnan(v)) return "nan";
    return v > 0 ? "inf" : "-inf";
}

[[nodiscard]] inline json numbers(const std::vector<double>& v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

[[nodiscard]] inline json to_json(const MarketParams& m) {
    return {{"alpha", m.alpha}, {"r", m.r}, {"sigma", m.sigma}, {"beta", m.beta}, {"T", m.T}};
}

[[nodiscard]] inline json to_json(const ModelParams& p) {
    json j = to_json(p.market);
    j["lambda"] = p.costs.lambda;
    j["mu"] = p.costs.mu;
    j["theta"] = p.costs.theta();
    if (p.utility.kind == UtilityKind::crra_no_consumption) j["gamma"] = p.utility.gamma;
    return j;
}

[[nodiscard]] inline json to_json(const SolveStats& s) {
    return {{"psor_sweeps", s.psor_sweeps},
            {"relaxation_fallbacks", s.relaxation_fallbacks},
            {"max_picard_iterations", s.max_picard_iterations},
            {"time_steps", s.time_steps},
            {"final_change", number(s.final_change)},
            {"warnings", s.warnings}};
}

[[nodiscard]] inline json to_json(const Assertion& a) {
    return {{"claim", a.claim},       {"description", a.description}, {"passed", a.passed},
            {"worst", number(a.worst)}, {"tolerance", number(a.tolerance)}, {"detail", a.detail}};
}

[[nodiscard]] inline json to_json(const InvariantReport& r) {
    json a = json::array();
    for (const auto& c : r.checks) {
        json j{{"name", c.name}, {"applicable", c.applicable}, {"passed", c.passed}};
        if (!c.applicable) {
            j["note"] = c.note;
        } else {
            j["worst"] = number(c.worst);
            j["tolerance"] = number(c.tolerance);
        }
        a.push_back(std::move(j));
    }
    return a;
}

[[nodiscard]] inline json to_json(const SweepReport& s) {
    json j{{"name", s.name}, {"axis", s.axis}, {"grid", numbers(s.grid)}, {"fixed", to_json(s.fixed)},
           {"passed", s.passed()}};
    json asserts = json::array();
    for (const auto& a : s.assertions) asserts.push_back(to_json(a));
    j["assertions"] = std::move(asserts);
    for (const auto& [name, values] : s.columns) j["columns"][name] = numbers(values);
    j["notes"] = s.notes;
    return j;
}

[[nodiscard]] inline json to_json(const VerificationReport& r) {
    json j{{"profile", r.profile}, {"passed", r.passed()}, {"seconds", r.seconds},
           {"solves", r.solves},   {"cache_hits", r.cache_hits}};
    json sweeps = json::array();
    for (const auto& s : r.sweeps) sweeps.push_back(to_json(s));
    j["sweeps"] = std::move(sweeps);
    json extra = json::array();
    for (const auto& a : r.assertions) extra.push_back(to_json(a));
    j["assertions"] = std::move(extra);
    j["expected_claims"] = r.expected_claims;
    j["unexercised"] = r.unexercised;
    return j;
}

[[nodiscard]] inline json to_json(const SimulationResult& r) {
    return {{"mean", number(r.mean)},
            {"std_error", number(r.std_error)},
            {"n_paths", r.n_paths},
            {"n_steps", r.n_steps},
            {"frac_sell", r.frac_sell},
            {"frac_hold", r.frac_hold},
            {"frac_buy", r.frac_buy},
            {"mean_sold", r.mean_sold},
            {"mean_bought", r.mean_bought},
            {"mean_trades", r.mean_trades},
            {"max_excursion", r.max_excursion},
            {"insolvent_paths", r.insolvent_paths}};
}

[[nodiscard]] inline json to_json(const PerturbationStudy& st) {
    json rows = json::array();
    for (const auto& row : st.rows) {
        rows.push_back({{"label", row.label},
                        {"shift", number(row.shift)},
                        {"mean", number(row.result.mean)},
                        {"std_error", number(row.result.std_error)},
                        {"gap", number(row.gap)},
                        {"gap_error", number(row.gap_error)}});
    }
    json j{{"rows", std::move(rows)},
           {"base", st.rows[st.base].label},
           {"best", st.rows[st.best].label},
           {"base_within_two_se", st.base_within_two_se}};
    if (st.has_collapse) j["collapse_worse"] = st.collapse_worse;
    return j;
}

[[nodiscard]] inline json to_json(const RefinementReport& r) {
    return {{"label", r.label},
            {"h", r.h},
            {"tolerance", r.tolerance},
            {"worst_sell", number(r.worst_sell)},
            {"worst_buy", number(r.worst_buy)},
            {"worst_curve", r.worst_curve},
            {"worst_time", r.worst_time},
            {"worst_speed", number(r.worst_speed)},
            {"slices", r.slices},
            {"failing", r.failing},
            {"sentinel_mismatch", r.sentinel_mismatch},
            {"skipped", r.skipped},
            {"passed", r.passed()}};
}

/// Common header of every run.json: configuration, its hash and the tool name.
[[nodiscard]] inline json run_header(const RunConfig& c, std::string_view command) {
    json cfg = json::object();
    std::istringstream is(canonical_text(c, false));
    std::string line;
    while (std::getline(is, line)) {
        const auto eq = line.find(" = ");
        cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
    return {{"command", command}, {"config_hash", config_hash(c)}, {"config", std::move(cfg)}};
}

inline void write_json(const std::filesystem::path& path, const json& j) {
    std::ofstream os(path);
    if (!os) throw usage_error("cannot open " + path.string() + " for writing");
    os << j.dump(2) << '\n';
}

/// First line of every CSV written by the tool; pandas and friends skip it
/// with comment='#'.
[[nodiscard]] inline std::string csv_hash_line(const RunConfig& c) { return "# config_hash=" + config_hash(c); }

inline void write_perturbation_csv(std::ostream& os, const PerturbationStudy& st) {
    os << "label,shift,mean,std_error,gap,gap_error\n";
    for (const auto& row : st.rows) {
        os << row.label << ',' << format_value(row.shift) << ',' << format_value(row.result.mean) << ','
           << format_value(row.result.std_error) << ',' << format_value(row.gap) << ','
           << format_value(row.gap_error) << '\n';
    }
}

}  // namespace mertc
