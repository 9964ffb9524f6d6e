#pragma once

// Named verification profiles and the runner that exercises every claim of
// a profile and fails closed on claims left without an assertion.

#include <chrono>
#include <functional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "mertc/analysis.hpp"

namespace mertc {

struct VerifyProfile {
    std::string name = "default";
    GridConfig grid;
    SolverConfig solver;
    std::set<ClaimGroup> groups{ClaimGroup::log, ClaimGroup::crra, ClaimGroup::invariant};
    int terminal_levels = 4;

    MarketParams market;  ///< log-utility market
    CostParams costs;     ///< base costs for the per-axis sweeps and the terminal limit
    std::vector<double> theta_grid;
    std::vector<std::pair<double, double>> comparison_pairs;
    std::vector<double> lambda_grid;
    std::vector<double> mu_grid;
    MarketParams no_leverage_market{0.05, 0.01, 0.3, 0.1, 2.0};
    std::vector<double> figure_costs;  ///< lambda = mu values of the bracketing sweep
    double figure_time = 0.25;
    std::vector<double> containment_costs;
    double large_theta_beta = 0.5;
    std::vector<double> large_theta_grid;
    std::vector<double> large_theta_lambdas;

    ModelParams crra_base{{0.07, 0.01, 0.2, 0.1, 2.0}, {0.05, 0.05}, UtilitySpec::crra(-1.0)};
    double crra_fixed_ratio = 1.25;
    std::vector<double> premium_grid;
    std::vector<double> risk_aversion_grid;
    std::vector<double> sigma_grid;
};

namespace detail {

inline std::vector<double> stepped(double from, double to, double step) {
    std::vector<double> out;
    const int n = static_cast<int>(std::lround((to - from) / step));
    // rounded to 1e-10 so values coincide with the same literals elsewhere
    for (int i = 0; i <= n; ++i) out.push_back(std::round((from + i * step) * 1e10) / 1e10);
    return out;
}

}  // namespace detail

/// Profiles: "default" (full suite, default grid), "quick" (coarse grid,
/// thinner sweeps), "log" and "crra" (default grid restricted to one
/// problem family and its invariants).
[[nodiscard]] inline VerifyProfile verify_profile(std::string_view name) {
    VerifyProfile p;
    p.name = std::string(name);
    p.theta_grid = detail::stepped(1.05, 2.0, 0.05);
    p.comparison_pairs = {{1.1, 1.5}, {1.05, 1.2}, {1.2, 2.0}};
    p.lambda_grid = {0.02, 0.05, 0.1, 0.2, 0.3};
    p.mu_grid = {0.02, 0.05, 0.1, 0.2, 0.3};
    p.figure_costs = {0.001, 0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5};
    p.containment_costs = {0.01, 0.05, 0.1};
    p.large_theta_grid = {2.0, 3.0, 4.0, 6.0, 8.0};
    p.large_theta_lambdas = {1.0, 2.0, 3.0};
    p.premium_grid = {0.02, 0.04, 0.06, 0.08, 0.1};
    p.risk_aversion_grid = {1.5, 2.0, 3.0, 5.0};
    p.sigma_grid = {0.15, 0.2, 0.3};

    if (name == "default") return p;
    if (name == "quick") {
        p.grid.n_space = 401;
        p.grid.n_time = 160;
        p.theta_grid = detail::stepped(1.05, 2.0, 0.19);
        p.lambda_grid = {0.02, 0.1, 0.3};
        p.mu_grid = {0.02, 0.1, 0.3};
        p.figure_costs = {0.001, 0.01, 0.05, 0.1, 0.2, 0.3, 0.5};
        p.containment_costs = {0.05};
        p.large_theta_grid = {2.0, 4.0, 8.0};
        p.large_theta_lambdas = {1.0, 3.0};
        p.premium_grid = {0.02, 0.06, 0.1};
        p.risk_aversion_grid = {1.5, 3.0, 5.0};
        return p;
    }
    if (name == "log") {
        p.groups = {ClaimGroup::log, ClaimGroup::invariant};
        return p;
    }
    if (name == "crra") {
        p.groups = {ClaimGroup::crra, ClaimGroup::invariant};
        return p;
    }
    throw config_error("unknown verification profile '" + std::string(name) + "'");
}

struct VerificationReport {
    std::string profile;
    std::vector<SweepReport> sweeps;
    std::vector<Assertion> assertions;  ///< assertions not tied to a sweep
    std::vector<std::string> expected_claims;
    std::vector<std::string> unexercised;
    double seconds = 0.0;
    long solves = 0;
    long cache_hits = 0;

    [[nodiscard]] std::vector<const Assertion*> all_assertions() const {
        std::vector<const Assertion*> out;
        for (const auto& s : sweeps) {
            for (const auto& a : s.assertions) out.push_back(&a);
        }
        for (const auto& a : assertions) out.push_back(&a);
        return out;
    }

    [[nodiscard]] bool passed() const {
        if (!unexercised.empty()) return false;
        for (const auto* a : all_assertions()) {
            if (!a->passed) return false;
        }
        return true;
    }
};

using ProgressFn = std::function<void(std::string_view)>;

/// Runs every check of the profile. Fresh solves feed the invariant
/// collector through the cache hook.
[[nodiscard]] inline VerificationReport run_verification(const VerifyProfile& prof, int workers = 1,
                                                         FieldCache* cache = nullptr,
                                                         const ProgressFn& progress = {}) {
    const auto started = std::chrono::steady_clock::now();
    FieldCache local(24);
    FieldCache& fc = cache ? *cache : local;
    InvariantCollector invariants;
    const bool with_invariants = prof.groups.count(ClaimGroup::invariant) > 0;
    if (with_invariants) fc.on_solved([&](const SolutionField& f) { invariants.add(f); });

    AnalysisOptions o;
    o.grid = prof.grid;
    o.solver = prof.solver;
    o.workers = workers;
    o.cache = &fc;
    const auto note = [&](std::string_view what) {
        if (progress) progress(what);
    };

    VerificationReport rep;
    rep.profile = prof.name;
    const bool log = prof.groups.count(ClaimGroup::log) > 0;
    const bool crra = prof.groups.count(ClaimGroup::crra) > 0;

    if (log) {
        ModelParams base{prof.market, prof.costs, UtilitySpec::log()};

        note("theta monotonicity");
        rep.sweeps.push_back(check_monotonicity_costs(base, prof.theta_grid, o));

        note("comparison principle");
        for (const auto& [t1, t2] : prof.comparison_pairs) {
            rep.assertions.push_back(check_comparison_principle(base, t1, t2, o));
        }

        note("cost-adjusted monotonicity");
        for (auto& s : check_adjusted_monotonicity(base, prof.lambda_grid, prof.mu_grid, o)) {
            rep.sweeps.push_back(std::move(s));
        }

        note("no-leverage monotonicity");
        ModelParams nolev{prof.no_leverage_market, prof.costs, UtilitySpec::log()};
        for (auto& s : check_no_leverage(nolev, prof.lambda_grid, prof.mu_grid, o)) rep.sweeps.push_back(std::move(s));

        note("Merton-line bracketing");
        std::vector<CostParams> fig;
        for (double c : prof.figure_costs) fig.push_back({c, c});
        auto br = check_bracketing(base, fig, o, prof.figure_time, true);
        br.name = "merton-bracketing-figure";
        rep.sweeps.push_back(std::move(br));
        std::vector<CostParams> cont;
        for (double c : prof.containment_costs) cont.push_back({c, c});
        auto br2 = check_bracketing(nolev, cont, o);
        br2.name = "merton-bracketing-no-leverage";
        rep.sweeps.push_back(std::move(br2));

        note("terminal limit");
        rep.sweeps.push_back(check_terminal_limit(base, prof.costs, o, prof.terminal_levels));

        note("large theta");
        auto lt = base;
        lt.market.beta = prof.large_theta_beta;
        rep.sweeps.push_back(check_large_theta(lt, prof.large_theta_grid, prof.large_theta_lambdas, o).report);
    }

    if (crra) {
        note("CRRA risk premium");
        rep.sweeps.push_back(check_param_monotonicity(prof.crra_base, CrraAxis::risk_premium, prof.premium_grid, o));
        note("CRRA risk aversion");
        rep.sweeps.push_back(
            check_param_monotonicity(prof.crra_base, CrraAxis::risk_aversion, prof.risk_aversion_grid, o));
        note("CRRA sigma");
        auto sb = prof.crra_base;
        sb.market.alpha = sb.market.r + prof.crra_fixed_ratio * sb.market.sigma * sb.market.sigma;
        rep.sweeps.push_back(check_param_monotonicity(sb, CrraAxis::sigma_fixed_ratio, prof.sigma_grid, o));
    }

    if (with_invariants) {
        for (auto& a : invariants.assertions()) rep.assertions.push_back(std::move(a));
        fc.on_solved({});
    }

    // fail closed: every claim of the profile needs at least one assertion
    std::set<std::string> seen;
    for (const auto* a : rep.all_assertions()) seen.insert(a->claim);
    for (const auto& c : claim_registry()) {
        if (!prof.groups.count(c.group)) continue;
        // these two are stated for the problem without consumption
        if (!crra && (c.id == "inv-scaling-positive" || c.id == "inv-nondecreasing-in-t")) continue;
        rep.expected_claims.emplace_back(c.id);
        if (!seen.count(std::string(c.id))) rep.unexercised.emplace_back(c.id);
    }
    rep.solves = fc.solves();
    rep.cache_hits = fc.hits();
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    return rep;
}

}  // namespace mertc
