// Command-line front end: solve | sweep | verify | simulate.
//
// Exit codes: 0 success, 1 assertion failure, 2 configuration error,
// 3 solver failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mertc/boundary.hpp"
#include "mertc/cache.hpp"
#include "mertc/config.hpp"
#include "mertc/field_io.hpp"
#include "mertc/invariants.hpp"
#include "mertc/montecarlo.hpp"
#include "mertc/report.hpp"
#include "mertc/verify.hpp"

namespace fs = std::filesystem;
using namespace mertc;

namespace {

enum Exit { ok = 0, assertion_failed = 1, bad_config = 2, solver_failed = 3 };

struct CommonFlags {
    std::string config;
    std::vector<std::string> set;
    std::string out;
    int workers = 0;
    std::string profile;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool no_cache = false;
};

void add_common(CLI::App* sub, CommonFlags& f) {
    sub->add_option("--config", f.config, "key = value config file")->check(CLI::ExistingFile);
    sub->add_option("--set", f.set, "override one config key (key=value), repeatable");
    sub->add_option("--out", f.out, "output directory");
    sub->add_option("--workers", f.workers, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--profile", f.profile, "verification profile (default, quick, log, crra)");
    sub->add_option_function<std::uint64_t>(
        "--seed", [&f](std::uint64_t s) { f.seed = s, f.seed_given = true; }, "simulation seed");
    sub->add_flag("--no-cache", f.no_cache, "ignore and do not write the on-disk solve cache");
}

RunConfig build_config(const CommonFlags& f) {
    RunConfig c;
    if (!f.config.empty()) apply_file(c, f.config);
    for (const auto& s : f.set) apply_override(c, s);
    if (!f.out.empty()) c.out = f.out;
    if (f.workers > 0) c.workers = f.workers;
    if (!f.profile.empty()) c.profile = f.profile;
    if (f.seed_given) c.sim.seed = f.seed;
    if (f.no_cache) c.cache = false;
    c.sim.workers = c.workers;
    require_valid(c);
    return c;
}

FieldCache make_cache(const RunConfig& c, std::size_t capacity) {
    return FieldCache(capacity, c.cache ? fs::path(c.out) / "cache" : fs::path{});
}

std::ofstream open_csv(const fs::path& path, const RunConfig& c) {
    std::ofstream os(path);
    if (!os) throw usage_error("cannot open " + path.string() + " for writing");
    os << csv_hash_line(c) << '\n';
    return os;
}

void report_stats(const SolutionField& f, const FieldCache& cache) {
    if (cache.solves() == 0) {
        std::fprintf(stderr, "field loaded from cache\n");
        return;
    }
    std::fprintf(stderr, "solved: %d time steps, %ld PSOR sweeps, max %d Picard iterations\n", f.stats.time_steps,
                 f.stats.psor_sweeps, f.stats.max_picard_iterations);
    for (const auto& w : f.stats.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

int cmd_solve(const RunConfig& c) {
    const fs::path out(c.out);
    auto cache = make_cache(c, 1);
    const auto field = cache.get(c.spec);
    report_stats(*field, cache);
    const auto curves = boundaries(*field);
    {
        auto os = open_csv(out / "boundaries.csv", c);
        write_csv(os, curves);
    }
    save_field((out / "field.bin").string(), *field);

    const auto inv = run_invariant_suite(*field);
    auto run = run_header(c, "solve");
    run["spec_hash"] = hex64(spec_hash(c.spec));
    run["variant"] = std::string(to_string(c.spec.variant));
    run["h"] = field->grid.h;
    run["merton_line"] = c.spec.variant == Variant::crra_no_consumption
                             ? crra_merton_line(c.spec.params.market, c.spec.params.utility.gamma)
                             : merton_line(c.spec.params.market);
    run["initial"] = {{"sell_hat", number(curves.sell_hat.front())},
                      {"buy_hat", number(curves.buy_hat.front())},
                      {"sell_orig", number(curves.sell_orig.front())},
                      {"buy_orig", number(curves.buy_orig.front())}};
    run["invariants"] = to_json(inv);
    run["invariants_passed"] = inv.passed();
    run["files"] = {"boundaries.csv", "field.bin"};
    write_json(out / "run.json", run);
    std::printf("x_s(0) = %s, x_b(0) = %s (bid frame); invariants %s\n", format_value(curves.sell_hat.front()).c_str(),
                format_value(curves.buy_hat.front()).c_str(), inv.passed() ? "pass" : "FAIL");
    return inv.passed() ? ok : assertion_failed;
}

int cmd_sweep(const RunConfig& c) {
    if (c.spec.variant != Variant::log_consumption_hat) {
        throw config_error("sweep runs on the finite-horizon log problem (problem = log)");
    }
    const fs::path out(c.out);
    auto cache = make_cache(c, 4);
    AnalysisOptions o;
    o.grid = c.spec.grid;
    o.solver = c.spec.solver;
    o.workers = c.workers;
    o.cache = &cache;
    const auto& base = c.spec.params;

    SweepReport rep;
    switch (c.sweep.axis) {
        case SweepAxis::cost: {
            std::vector<CostParams> pairs;
            for (double v : c.sweep.values) pairs.push_back({v, v});
            rep = check_bracketing(base, pairs, o, c.sweep.time, false);
            break;
        }
        case SweepAxis::theta:
            rep = check_monotonicity_costs(base, c.sweep.values, o);
            break;
        case SweepAxis::lambda:
        case SweepAxis::mu: {
            auto reps = check_adjusted_monotonicity(base, c.sweep.values, c.sweep.values, o);
            rep = std::move(reps[c.sweep.axis == SweepAxis::lambda ? 0 : 1]);
            break;
        }
    }

    const double xm = merton_line(base.market);
    {
        auto os = open_csv(out / "sweep.csv", c);
        os << "value,t,sell_hat,buy_hat,sell_orig,buy_orig,sell_adjusted,buy_adjusted\n";
        for (std::size_t j = 0; j < rep.curves.size(); ++j) {
            const auto& cv = rep.curves[j];
            const auto k = nearest_index(cv, c.sweep.time);
            os << format_value(rep.grid[j]) << ',' << format_value(cv.times[k]) << ',' << format_value(cv.sell_hat[k])
               << ',' << format_value(cv.buy_hat[k]) << ',' << format_value(cv.sell_orig[k]) << ','
               << format_value(cv.buy_orig[k]) << ',' << format_value(cv.sell_adjusted[k]) << ','
               << format_value(cv.buy_adjusted[k]) << '\n';
        }
    }
    std::vector<std::string> files{"sweep.csv"};
    if (c.sweep.axis == SweepAxis::cost) {
        auto left = open_csv(out / "figure1_left.csv", c);
        auto right = open_csv(out / "figure1_right.csv", c);
        left << "cost,x_s,x_b,x_M\n";
        right << "cost,x_s/(1-mu),x_b/(1+lambda),x_M\n";
        for (std::size_t j = 0; j < rep.curves.size(); ++j) {
            const auto& cv = rep.curves[j];
            const auto k = nearest_index(cv, c.sweep.time);
            const auto cost = format_value(rep.grid[j]);
            left << cost << ',' << format_value(cv.sell_orig[k]) << ',' << format_value(cv.buy_orig[k]) << ','
                 << format_value(xm) << '\n';
            right << cost << ',' << format_value(cv.sell_adjusted[k]) << ',' << format_value(cv.buy_adjusted[k])
                  << ',' << format_value(xm) << '\n';
        }
        files.emplace_back("figure1_left.csv");
        files.emplace_back("figure1_right.csv");
    }
    auto run = run_header(c, "sweep");
    run["report"] = to_json(rep);
    run["files"] = files;
    write_json(out / "run.json", run);
    for (const auto& a : rep.assertions) {
        std::printf("%s  %s (worst %s, tolerance %s)\n", a.passed ? "PASS" : "FAIL", a.description.c_str(),
                    format_value(a.worst).c_str(), format_value(a.tolerance).c_str());
    }
    for (const auto& n : rep.notes) std::printf("note: %s\n", n.c_str());
    return rep.passed() ? ok : assertion_failed;
}

int cmd_verify(const RunConfig& c) {
    const fs::path out(c.out);
    auto prof = verify_profile(c.profile);
    auto cache = make_cache(c, 24);
    const auto rep = run_verification(prof, c.workers, &cache,
                                      [](std::string_view s) { std::fprintf(stderr, "checking %.*s\n",
                                                                            static_cast<int>(s.size()), s.data()); });
    auto run = run_header(c, "verify");
    run["report"] = to_json(rep);
    write_json(out / "verify.json", run);
    for (const auto* a : rep.all_assertions()) {
        std::printf("%s  %-34s %s (worst %s, tolerance %s)%s%s\n", a->passed ? "PASS" : "FAIL", a->claim.c_str(),
                    a->description.c_str(), format_value(a->worst).c_str(), format_value(a->tolerance).c_str(),
                    a->detail.empty() ? "" : ": ", a->detail.c_str());
    }
    for (const auto& u : rep.unexercised) std::printf("FAIL  %-34s no assertion exercised this claim\n", u.c_str());
    std::printf("profile %s: %s (%ld solves, %.1f s)\n", rep.profile.c_str(), rep.passed() ? "passed" : "FAILED",
                rep.solves, rep.seconds);
    return rep.passed() ? ok : assertion_failed;
}

int cmd_simulate(const RunConfig& c) {
    if (c.spec.variant != Variant::log_consumption_hat) {
        throw config_error("simulate runs on the finite-horizon log problem (problem = log)");
    }
    const fs::path out(c.out);
    auto cache = make_cache(c, 1);
    const auto field = cache.get(c.spec);
    report_stats(*field, cache);
    const auto curves = extract_boundaries(*field);
    auto sim = c.sim;
    sim.keep_paths = c.dump_paths;
    const auto result = simulate_policy(curves, *field, sim);

    auto run = run_header(c, "simulate");
    run["spec_hash"] = hex64(spec_hash(c.spec));
    run["result"] = to_json(result);
    std::vector<std::string> files;
    if (c.dump_paths) {
        auto os = open_csv(out / "paths.csv", c);
        write_path_csv(os, result);
        files.emplace_back("paths.csv");
    }
    bool passed = true;
    if (c.perturb) {
        const auto st = perturbation_study(curves, *field, sim, c.shifts);
        auto os = open_csv(out / "perturbation.csv", c);
        write_perturbation_csv(os, st);
        files.emplace_back("perturbation.csv");
        run["perturbation"] = to_json(st);
        passed = st.base_within_two_se && (!st.has_collapse || st.collapse_worse);
        for (const auto& row : st.rows) {
            std::printf("%-16s mean %s  se %s  gap %s +- %s\n", row.label.c_str(), format_value(row.result.mean).c_str(),
                        format_value(row.result.std_error).c_str(), format_value(row.gap).c_str(),
                        format_value(row.gap_error).c_str());
        }
        std::printf("unshifted within 2 SE of best: %s; collapsed band worse: %s\n",
                    st.base_within_two_se ? "yes" : "NO", st.collapse_worse ? "yes" : "NO");
    }
    run["files"] = files;
    write_json(out / "sim.json", run);
    std::printf("expected utility %s +- %s over %d paths\n", format_value(result.mean).c_str(),
                format_value(result.std_error).c_str(), result.n_paths);
    return passed ? ok : assertion_failed;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Free-boundary solver for the Merton problem with proportional transaction costs"};
    app.require_subcommand(1);
    CommonFlags flags;
    auto* solve_cmd = app.add_subcommand("solve", "solve one problem; write boundaries.csv, field.bin, run.json");
    auto* sweep_cmd = app.add_subcommand("sweep", "solve along a cost axis; write sweep and figure tables");
    auto* verify_cmd = app.add_subcommand("verify", "run every claim of a verification profile");
    auto* sim_cmd = app.add_subcommand("simulate", "simulate the boundary policy");
    for (auto* s : {solve_cmd, sweep_cmd, verify_cmd, sim_cmd}) add_common(s, flags);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? ok : bad_config;
    }

    try {
        const auto cfg = build_config(flags);
        fs::create_directories(cfg.out);
        if (solve_cmd->parsed()) return cmd_solve(cfg);
        if (sweep_cmd->parsed()) return cmd_sweep(cfg);
        if (verify_cmd->parsed()) return cmd_verify(cfg);
        return cmd_simulate(cfg);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return e.kind() == ErrorKind::solver ? solver_failed : bad_config;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return solver_failed;
    }
}
