// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.
// Usage: acceptance [--quick] [--workers N]

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "mertc/analysis.hpp"
#include "mertc/boundary.hpp"
#include "mertc/montecarlo.hpp"
#include "mertc/oracle.hpp"
#include "mertc/verify.hpp"

using namespace mertc;

namespace {

struct Outcome {
    bool passed = true;
    std::string detail;
};

struct Criterion {
    int number;
    const char* title;
    Outcome outcome;
    double seconds = 0.0;
};

/// Folds assertions into one outcome; the detail names the failures, or the
/// tightest assertion when all pass.
Outcome fold(const std::vector<const Assertion*>& list) {
    Outcome o;
    if (list.empty()) return {false, "no assertions ran"};
    const Assertion* tightest = nullptr;
    double tightest_ratio = -1.0;
    std::string failures;
    for (const auto* a : list) {
        if (!a->passed) {
            o.passed = false;
            failures += (failures.empty() ? "" : "; ") + a->description + " (worst " + format_value(a->worst) +
                        ", tol " + format_value(a->tolerance) + (a->detail.empty() ? "" : ", " + a->detail) + ")";
        }
        const double ratio = a->tolerance > 0.0 ? a->worst / a->tolerance : (a->worst > 0.0 ? 1e300 : 0.0);
        if (ratio > tightest_ratio) {
            tightest_ratio = ratio;
            tightest = a;
        }
    }
    if (!o.passed) {
        o.detail = failures;
    } else {
        o.detail = std::to_string(list.size()) + " assertions; tightest: " + tightest->description + " (worst " +
                   format_value(tightest->worst) + ", tol " + format_value(tightest->tolerance) + ")";
    }
    return o;
}

std::vector<const Assertion*> select(const VerificationReport& rep, const std::function<bool(const std::string&)>& sweep,
                                     const std::function<bool(const Assertion&)>& loose = {}) {
    std::vector<const Assertion*> out;
    for (const auto& s : rep.sweeps) {
        if (!sweep(s.name)) continue;
        for (const auto& a : s.assertions) out.push_back(&a);
    }
    if (loose) {
        for (const auto& a : rep.assertions) {
            if (loose(a)) out.push_back(&a);
        }
    }
    return out;
}

bool starts_with(const std::string& s, const char* prefix) { return s.rfind(prefix, 0) == 0; }

}  // namespace

int main(int argc, char** argv) {
    bool quick = false;
    int workers = 1;
    for (int i = 1; i < argc; ++i) {
        if (std::strcmp(argv[i], "--quick") == 0) {
            quick = true;
        } else if (std::strcmp(argv[i], "--workers") == 0 && i + 1 < argc) {
            workers = std::max(1, std::atoi(argv[++i]));
        } else {
            std::fprintf(stderr, "usage: acceptance [--quick] [--workers N]\n");
            return 2;
        }
    }

    std::vector<Criterion> results;
    const auto timed = [&](int number, const char* title, const std::function<Outcome()>& body) {
        const auto start = std::chrono::steady_clock::now();
        Outcome o;
        try {
            o = body();
        } catch (const std::exception& e) {
            o = {false, std::string("error: ") + e.what()};
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        results.push_back({number, title, o, secs});
        std::fprintf(stderr, "criterion %d done (%.1f s): %s\n", number, secs, o.passed ? "pass" : "FAIL");
    };

    // 1
    timed(1, "Merton line at the reference market", [] {
        const double xm = merton_line(MarketParams{});
        const double rounded = std::round(xm * 1e4) / 1e4;
        return Outcome{rounded == -0.8621, "x_M = " + format_value(xm)};
    });

    // 2-9 share one verification run and its solve cache
    const auto prof = verify_profile(quick ? "quick" : "default");
    FieldCache cache(32);
    VerificationReport rep;
    const auto verify_start = std::chrono::steady_clock::now();
    try {
        rep = run_verification(prof, workers, &cache);
    } catch (const std::exception& e) {
        std::printf("FAIL  verification run aborted: %s\n", e.what());
        return 1;
    }
    std::fprintf(stderr, "verification run: %.1f s, %ld solves\n",
                 std::chrono::duration<double>(std::chrono::steady_clock::now() - verify_start).count(), rep.solves);

    timed(2, "Cost sweep: cost-adjusted bracketing and sell/Merton crossing", [&] {
        auto o = fold(select(rep, [](const std::string& n) { return n == "merton-bracketing-figure"; }));
        for (const auto& s : rep.sweeps) {
            if (s.name == "merton-bracketing-figure" && !s.notes.empty()) o.detail += "; " + s.notes.front();
        }
        return o;
    });
    timed(3, "Merged-cost monotonicity over theta (and per-cost adjusted boundaries)", [&] {
        return fold(select(rep, [](const std::string& n) {
            return n == "theta-monotonicity" || starts_with(n, "adjusted-monotonicity");
        }));
    });
    timed(4, "Comparison principle for three theta pairs", [&] {
        return fold(select(rep, [](const std::string&) { return false; },
                           [](const Assertion& a) { return a.claim == "comparison-principle-theta"; }));
    });
    timed(5, "No-leverage market: nonnegative boundaries, monotone in each cost", [&] {
        return fold(select(rep, [](const std::string& n) {
            return starts_with(n, "no-leverage") || n == "merton-bracketing-no-leverage";
        }));
    });
    timed(6, "Terminal limit of the sell boundary under refinement", [&] {
        auto o = fold(select(rep, [](const std::string& n) { return n == "terminal-limit"; }));
        for (const auto& s : rep.sweeps) {
            if (s.name == "terminal-limit" && !s.notes.empty()) o.detail += "; " + s.notes.front();
        }
        return o;
    });
    timed(7, "Large merged cost: plateau, sign pattern, infinite-horizon buy bound", [&] {
        return fold(select(rep, [](const std::string& n) { return n == "large-theta"; }));
    });
    timed(8, "CRRA boundaries in risk premium, risk aversion and sigma", [&] {
        return fold(select(rep, [](const std::string& n) { return starts_with(n, "crra-"); }));
    });

    // fields solved after the verification run feed this collector
    InvariantCollector late;
    cache.on_solved([&](const SolutionField& f) { late.add(f); });

    // 10
    timed(10, "Implicit solver versus explicit oracle on the coarse instance", [] {
        ProblemSpec s;
        s.params.market.T = 0.5;
        s.params.costs = CostParams::from_theta(1.2);
        s.grid.n_space = 201;
        s.grid.n_time = 100;
        const auto a = solve(s);
        const auto b = oracle_solve(s);
        double sup = 0.0;
        for (std::size_t i = 0; i < a.values.size(); ++i) sup = std::max(sup, std::abs(a.values[i] - b.values[i]));
        const auto ca = extract_boundaries(a);
        const auto cb = extract_boundaries(b);
        double cells = 0.0;
        int mismatch = 0;
        for (std::size_t k = 0; k < ca.size(); ++k) {
            cells = std::max(cells, std::abs(ca.sell_hat[k] - cb.sell_hat[k]) / a.grid.h);
            if (std::isinf(ca.buy_hat[k]) != std::isinf(cb.buy_hat[k])) {
                ++mismatch;
            } else if (std::isfinite(ca.buy_hat[k])) {
                cells = std::max(cells, std::abs(ca.buy_hat[k] - cb.buy_hat[k]) / a.grid.h);
            }
        }
        return Outcome{sup <= 5e-3 && cells <= 2.0 && mismatch == 0,
                       "sup |v - v_oracle| = " + format_value(sup) + " (limit 0.005), boundary gap " +
                           format_value(cells) + " cells (limit 2), sentinel mismatches " + std::to_string(mismatch)};
    });

    // 11
    timed(11, "Monte Carlo optimality of the solved boundaries", [&] {
        ProblemSpec s;
        s.params.costs = {0.1, 0.1};
        if (quick) {
            s.grid.n_space = 401;
            s.grid.n_time = 160;
        }
        const auto field = cache.get(s);
        const auto curves = extract_boundaries(*field);
        SimConfig sim;
        sim.workers = workers;
        if (quick) {
            sim.n_paths = 5000;
            sim.n_steps = 400;
        }
        const auto st = perturbation_study(curves, *field, sim, {-0.2, -0.1, 0.0, 0.1, 0.2});
        const auto rerun = simulate_policy(curves, *field, sim);
        const auto& base = st.rows[st.base].result;
        const bool identical = rerun.mean == base.mean && rerun.std_error == base.std_error;
        int insolvent = 0;
        for (const auto& row : st.rows) insolvent += row.result.insolvent_paths;
        std::string detail = "base " + format_value(base.mean) + " +- " + format_value(base.std_error) + ", best " +
                             st.rows[st.best].label + "; gaps";
        for (const auto& row : st.rows) {
            if (&row != &st.rows[st.base]) detail += " [" + row.label + ": " + format_value(row.gap) + "]";
        }
        detail += "; insolvent paths " + std::to_string(insolvent) + "; rerun " + (identical ? "identical" : "DIFFERS");
        return Outcome{st.base_within_two_se && st.collapse_worse && insolvent == 0 && identical, detail};
    });

    // 12
    timed(12, "Refinement stability of every reported boundary", [&] {
        AnalysisOptions o;
        o.workers = workers;
        o.cache = &cache;
        std::vector<std::pair<std::string, ProblemSpec>> cases;
        ProblemSpec logp;
        logp.params.costs = {0.1, 0.1};
        logp.grid = prof.grid;
        cases.emplace_back("log, theta = 11/9", logp);
        ProblemSpec crra;
        crra.variant = Variant::crra_no_consumption;
        crra.params = prof.crra_base;
        crra.grid = prof.grid;
        cases.emplace_back("crra, gamma = -1", crra);
        ProblemSpec stat;
        stat.variant = Variant::infinite_horizon_log;
        stat.params.market.beta = 0.5;
        stat.params.costs = CostParams::from_theta(2.0);
        stat.grid = prof.grid;
        cases.emplace_back("stationary, theta = 2", stat);
        Outcome out;
        for (const auto& [label, spec] : cases) {
            const auto r = check_refinement_stability(spec, label, o);
            out.passed = out.passed && r.passed();
            out.detail += (out.detail.empty() ? "" : "; ") + r.label + ": worst move " + format_value(r.worst()) +
                          " (" + r.worst_curve + " at t = " + format_value(r.worst_time) + ") vs 2h = " +
                          format_value(r.tolerance) + ", " + std::to_string(r.failing) + " failing of " +
                          std::to_string(r.slices) + " slices";
            if (r.sentinel_mismatch > 0) out.detail += ", " + std::to_string(r.sentinel_mismatch) + " sentinel mismatches";
        }
        return out;
    });

    // 9, after every solve of this run
    timed(9, "Invariant suites on every solved field", [&] {
        std::vector<const Assertion*> list;
        for (const auto& a : rep.assertions) {
            if (starts_with(a.claim, "inv-")) list.push_back(&a);
        }
        const auto extra = late.assertions();
        for (const auto& a : extra) list.push_back(&a);
        auto o = fold(list);
        o.detail += "; " + std::to_string(late.fields()) + " fields solved after the verification run";
        if (!rep.unexercised.empty()) {
            o.passed = false;
            o.detail += "; unexercised claims:";
            for (const auto& u : rep.unexercised) o.detail += " " + u;
        }
        return o;
    });

    std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) { return a.number < b.number; });
    int failed = 0;
    for (const auto& c : results) {
        failed += c.outcome.passed ? 0 : 1;
        std::printf("%s  [%2d] %s (%.1f s): %s\n", c.outcome.passed ? "PASS" : "FAIL", c.number, c.title, c.seconds,
                    c.outcome.detail.c_str());
    }
    std::printf("acceptance: %zu criteria, %d failed\n", results.size(), failed);
    return failed == 0 ? 0 : 1;
}
