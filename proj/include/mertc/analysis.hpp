#pragma once

// Parameter sweeps and pointwise comparisons that check the monotonicity,
// bracketing and limit statements about the trading boundaries. Every
// assertion carries the id of a registered claim; a verification run fails
// if any claim in its profile is left without an assertion.

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <limits>
#include <mutex>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mertc/boundary.hpp"
#include "mertc/cache.hpp"
#include "mertc/error.hpp"
#include "mertc/invariants.hpp"
#include "mertc/params.hpp"
#include "mertc/problem.hpp"

namespace mertc {

// ---------------------------------------------------------------------------
// Claims

enum class ClaimGroup { log, crra, invariant };

struct Claim {
    std::string_view id;
    ClaimGroup group;
    std::string_view statement;
};

inline const std::vector<Claim>& claim_registry() {
    static const std::vector<Claim> claims{
        {"sell-hat-decreasing-in-theta", ClaimGroup::log,
         "bid-frame sell boundary is nonincreasing in the merged cost parameter"},
        {"buy-adjusted-increasing-in-theta", ClaimGroup::log,
         "bid-frame buy boundary divided by the merged cost parameter is nondecreasing in it"},
        {"adjusted-monotone-both-costs", ClaimGroup::log,
         "cost-adjusted sell boundary decreases and cost-adjusted buy boundary increases in each cost rate"},
        {"no-leverage-monotone", ClaimGroup::log,
         "with alpha - r <= sigma^2 both boundaries are nonnegative and the band widens in each cost rate"},
        {"merton-bracketing", ClaimGroup::log,
         "the Merton line lies between the cost-adjusted sell and buy boundaries"},
        {"terminal-sell-limit", ClaimGroup::log,
         "the bid-frame sell boundary tends to the Merton line at expiry"},
        {"comparison-principle-theta", ClaimGroup::log,
         "the bid-frame solution is pointwise nonincreasing in the merged cost parameter"},
        {"large-theta-sell-independence", ClaimGroup::log,
         "for large merged cost the sell boundary no longer depends on the buy cost and x_s < 0 < x_b"},
        {"buy-above-infinite-horizon", ClaimGroup::log,
         "the finite-horizon buy boundary stays above the infinite-horizon one"},
        {"crra-decreasing-in-risk-premium", ClaimGroup::crra,
         "CRRA boundaries decrease in the risk premium"},
        {"crra-increasing-in-risk-aversion", ClaimGroup::crra,
         "CRRA boundaries increase in 1 - gamma"},
        {"crra-decreasing-in-sigma", ClaimGroup::crra,
         "CRRA boundaries decrease in sigma at fixed (alpha - r) / sigma^2"},
        {"inv-obstacle-sandwich", ClaimGroup::invariant, "lower <= v <= upper at every node"},
        {"inv-decreasing-in-x", ClaimGroup::invariant, "v is decreasing in x"},
        {"inv-slope-bound", ClaimGroup::invariant, "v_x <= -v^2"},
        {"inv-scaling-positive", ClaimGroup::invariant, "x v_x + v >= 0 for the CRRA problem"},
        {"inv-nondecreasing-in-t", ClaimGroup::invariant, "v_t >= 0 without consumption"},
        {"inv-complementarity", ClaimGroup::invariant, "discrete complementarity conditions hold"},
    };
    return claims;
}

[[nodiscard]] inline bool is_registered(std::string_view id) {
    const auto& r = claim_registry();
    return std::any_of(r.begin(), r.end(), [&](const Claim& c) { return c.id == id; });
}

// ---------------------------------------------------------------------------
// Reports

struct Assertion {
    std::string claim;
    std::string description;
    bool passed = false;
    double worst = 0.0;  ///< worst violation; passes when <= tolerance
    double tolerance = 0.0;
    std::string detail;
};

inline Assertion make_assertion(std::string claim, std::string description, double worst,
                                double tolerance, std::string detail = {}) {
    if (!is_registered(claim)) throw usage_error("assertion references unknown claim " + claim);
    return {std::move(claim), std::move(description), worst <= tolerance, worst, tolerance,
            std::move(detail)};
}

struct SweepReport {
    std::string name;
    std::string axis;
    std::vector<double> grid;
    ModelParams fixed;
    std::vector<BoundaryCurves> curves;
    std::vector<Assertion> assertions;
    /// Extra per-point columns (name, values) for reporting.
    std::vector<std::pair<std::string, std::vector<double>>> columns;
    std::vector<std::string> notes;

    [[nodiscard]] bool passed() const {
        return std::all_of(assertions.begin(), assertions.end(), [](const auto& a) { return a.passed; });
    }
};

// ---------------------------------------------------------------------------
// Sweep plumbing

struct AnalysisOptions {
    GridConfig grid;
    SolverConfig solver;
    int workers = 1;
    FieldCache* cache = nullptr;  ///< shared cache; a private one is used when null
};

namespace detail {

inline ProblemSpec make_spec(Variant variant, const ModelParams& p, const AnalysisOptions& o) {
    ProblemSpec s;
    s.variant = variant;
    s.params = p;
    s.grid = o.grid;
    s.solver = o.solver;
    return s;
}

inline Variant variant_for(const ModelParams& p) {
    return p.utility.kind == UtilityKind::crra_no_consumption ? Variant::crra_no_consumption
                                                              : Variant::log_consumption_hat;
}

inline std::vector<FieldPtr> solve_all(const std::vector<ProblemSpec>& specs, const AnalysisOptions& o) {
    FieldCache local(0);
    FieldCache& cache = o.cache ? *o.cache : local;
    return parallel_map(specs.size(), o.workers, [&](std::size_t i) { return cache.get(specs[i]); });
}

inline std::vector<BoundaryCurves> curves_for(const std::vector<ModelParams>& points, const AnalysisOptions& o) {
    std::vector<ProblemSpec> specs;
    for (const auto& p : points) specs.push_back(make_spec(variant_for(p), p, o));
    std::vector<BoundaryCurves> out;
    for (const auto& f : solve_all(specs, o)) out.push_back(boundaries(*f));
    return out;
}

inline void require_increasing(const std::vector<double>& grid, std::string_view what) {
    if (grid.size() < 2) throw usage_error(std::string(what) + " needs at least two points");
    for (std::size_t i = 1; i < grid.size(); ++i) {
        if (!(grid[i] > grid[i - 1])) throw usage_error(std::string(what) + " must be strictly increasing");
    }
}

inline std::string fmt(double v) { return format_value(v); }

}  // namespace detail

enum class Trend { nonincreasing, nondecreasing };

/// Worst violation of `trend` between consecutive sweep points, slice by
/// slice. +inf entries follow IEEE order; slices where either point flags a
/// truncated buy boundary are skipped.
struct TrendResult {
    double worst = 0.0;
    std::size_t point = 0;  ///< index of the later point of the worst pair
    double time = 0.0;
    int skipped = 0;
};

inline TrendResult trend_violation(const std::vector<BoundaryCurves>& curves,
                                   std::vector<double> BoundaryCurves::*member, Trend trend,
                                   bool skip_truncated = false) {
    TrendResult r;
    for (std::size_t j = 1; j < curves.size(); ++j) {
        const auto& a = curves[j - 1];
        const auto& b = curves[j];
        if (a.size() != b.size()) throw usage_error("sweep curves have different time grids");
        for (std::size_t k = 0; k < a.size(); ++k) {
            if (skip_truncated && (a.buy_truncated[k] || b.buy_truncated[k])) {
                ++r.skipped;
                continue;
            }
            const double va = (a.*member)[k];
            const double vb = (b.*member)[k];
            double d = trend == Trend::nonincreasing ? vb - va : va - vb;
            if (std::isnan(d)) d = 0.0;  // both at the sentinel
#ifdef MERTC_TEST_FLIP_TRENDS
            d = -d;
#endif
            if (d > r.worst) {
                r.worst = d;
                r.point = j;
                r.time = a.times[k];
            }
        }
    }
    return r;
}

namespace detail {

inline Assertion trend_assertion(const SweepReport& rep, std::vector<double> BoundaryCurves::*member,
                                 Trend trend, std::string claim, std::string what, bool buy) {
    const auto r = trend_violation(rep.curves, member, trend, buy);
    const double tol = 2.0 * rep.curves.front().h;
    std::string detail;
    if (r.worst > 0.0) {
        detail = "worst at " + rep.axis + " = " + fmt(rep.grid[r.point]) + ", t = " + fmt(r.time);
    }
    if (r.skipped > 0) {
        if (!detail.empty()) detail += "; ";
        detail += std::to_string(r.skipped) + " slice pairs skipped (buy boundary in truncation margin)";
    }
    return make_assertion(std::move(claim), std::move(what), r.worst, tol, detail);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cost monotonicity

/// Sweeps the merged cost parameter with the whole cost on the buy side.
[[nodiscard]] inline SweepReport check_monotonicity_costs(const ModelParams& base,
                                                          const std::vector<double>& theta_grid,
                                                          const AnalysisOptions& o) {
    detail::require_increasing(theta_grid, "theta grid");
    if (!(theta_grid.front() > 1.0)) throw usage_error("theta grid must lie above 1");
    SweepReport rep;
    rep.name = "theta-monotonicity";
    rep.axis = "theta";
    rep.grid = theta_grid;
    rep.fixed = base;
    std::vector<ModelParams> points;
    for (double th : theta_grid) {
        auto p = base;
        p.costs = CostParams::from_theta(th);
        points.push_back(p);
    }
    rep.curves = detail::curves_for(points, o);
    rep.assertions.push_back(detail::trend_assertion(rep, &BoundaryCurves::sell_hat, Trend::nonincreasing,
                                                     "sell-hat-decreasing-in-theta",
                                                     "sell_hat nonincreasing in theta", false));
    rep.assertions.push_back(detail::trend_assertion(rep, &BoundaryCurves::buy_adjusted,
                                                     Trend::nondecreasing, "buy-adjusted-increasing-in-theta",
                                                     "buy_hat / theta nondecreasing in theta", true));
    return rep;
}

enum class CostAxis { lambda, mu };

/// Boundaries along one cost axis with the other rate held at its base value.
[[nodiscard]] inline SweepReport sweep_cost_axis(const ModelParams& base, CostAxis axis,
                                                 const std::vector<double>& rates, const AnalysisOptions& o) {
    detail::require_increasing(rates, "cost grid");
    SweepReport rep;
    rep.axis = axis == CostAxis::lambda ? "lambda" : "mu";
    rep.grid = rates;
    rep.fixed = base;
    std::vector<ModelParams> points;
    for (double rate : rates) {
        auto p = base;
        (axis == CostAxis::lambda ? p.costs.lambda : p.costs.mu) = rate;
        require_valid(p);
        points.push_back(p);
    }
    rep.curves = detail::curves_for(points, o);
    return rep;
}

/// Cost-adjusted boundaries along each cost axis separately.
[[nodiscard]] inline std::vector<SweepReport> check_adjusted_monotonicity(const ModelParams& base,
                                                                          const std::vector<double>& lambdas,
                                                                          const std::vector<double>& mus,
                                                                          const AnalysisOptions& o) {
    std::vector<SweepReport> out;
    for (auto axis : {CostAxis::lambda, CostAxis::mu}) {
        auto rep = sweep_cost_axis(base, axis, axis == CostAxis::lambda ? lambdas : mus, o);
        rep.name = "adjusted-monotonicity-" + rep.axis;
        rep.assertions.push_back(detail::trend_assertion(
            rep, &BoundaryCurves::sell_adjusted, Trend::nonincreasing, "adjusted-monotone-both-costs",
            "x_s / (1 - mu) nonincreasing in " + rep.axis, false));
        rep.assertions.push_back(detail::trend_assertion(
            rep, &BoundaryCurves::buy_adjusted, Trend::nondecreasing, "adjusted-monotone-both-costs",
            "x_b / (1 + lambda) nondecreasing in " + rep.axis, true));
        out.push_back(std::move(rep));
    }
    return out;
}

/// Plain boundaries along each cost axis for a market with alpha - r <= sigma^2.
[[nodiscard]] inline std::vector<SweepReport> check_no_leverage(const ModelParams& base,
                                                                const std::vector<double>& lambdas,
                                                                const std::vector<double>& mus,
                                                                const AnalysisOptions& o) {
    const auto& m = base.market;
    if (m.excess_return() > m.sigma * m.sigma) {
        throw usage_error("no-leverage check requires alpha - r <= sigma^2");
    }
    std::vector<SweepReport> out;
    for (auto axis : {CostAxis::lambda, CostAxis::mu}) {
        auto rep = sweep_cost_axis(base, axis, axis == CostAxis::lambda ? lambdas : mus, o);
        rep.name = "no-leverage-" + rep.axis;
        rep.assertions.push_back(detail::trend_assertion(rep, &BoundaryCurves::sell_orig, Trend::nonincreasing,
                                                         "no-leverage-monotone",
                                                         "x_s nonincreasing in " + rep.axis, false));
        rep.assertions.push_back(detail::trend_assertion(rep, &BoundaryCurves::buy_orig, Trend::nondecreasing,
                                                         "no-leverage-monotone",
                                                         "x_b nondecreasing in " + rep.axis, true));
        double worst = 0.0;
        for (const auto& c : rep.curves) {
            for (std::size_t k = 0; k < c.size(); ++k) worst = std::max(worst, -std::min(c.sell_orig[k], c.buy_orig[k]));
        }
        rep.assertions.push_back(make_assertion("no-leverage-monotone", "x_b >= x_s >= 0 along " + rep.axis,
                                                worst, 2.0 * rep.curves.front().h));
        out.push_back(std::move(rep));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Comparison principle

/// Pointwise check v(theta1) >= v(theta2) - allowance. The allowance is
/// 2h |v_x| at the node, the amount a one-cell shift of the free boundary can
/// move v; the reported worst violation is measured after subtracting it.
[[nodiscard]] inline Assertion check_comparison_principle(const ModelParams& base, double theta1,
                                                          double theta2, const AnalysisOptions& o) {
    auto p1 = base;
    auto p2 = base;
    p1.costs = CostParams::from_theta(theta1);
    p2.costs = CostParams::from_theta(theta2);
    const auto fields = detail::solve_all({detail::make_spec(Variant::log_consumption_hat, p1, o),
                                           detail::make_spec(Variant::log_consumption_hat, p2, o)},
                                          o);
    const auto& a = *fields[0];
    const auto& b = *fields[1];
    const double h = a.grid.h;
    const std::size_t n = a.nodes();
    double worst = -std::numeric_limits<double>::infinity();
    double raw = -std::numeric_limits<double>::infinity();
    double worst_x = 0.0, worst_t = 0.0;
    for (int k = 0; k < a.slices(); ++k) {
        const auto va = a.slice(k);
        const auto vb = b.slice(k);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t l = i > 0 ? i - 1 : i;
            const std::size_t r = i + 1 < n ? i + 1 : i;
            const double slope = std::max(std::abs(va[r] - va[l]), std::abs(vb[r] - vb[l])) /
                                 (static_cast<double>(r - l) * h);
            const double gap = vb[i] - va[i];
            raw = std::max(raw, gap);
            const double excess = gap - 2.0 * h * slope;
            if (excess > worst) {
                worst = excess;
                worst_x = a.grid.x[i];
                worst_t = a.time(k);
            }
        }
    }
    worst = std::max(worst, 0.0);
    return make_assertion("comparison-principle-theta",
                          "v(theta=" + detail::fmt(theta1) + ") >= v(theta=" + detail::fmt(theta2) + ")",
                          worst, 1e-6,
                          "max raw v2 - v1 = " + detail::fmt(raw) + "; worst at x = " + detail::fmt(worst_x) +
                              ", t = " + detail::fmt(worst_t));
}

// ---------------------------------------------------------------------------
// Bracketing of the Merton line

/// Checks sell_adjusted <= x_M <= buy_adjusted on every slice of every cost
/// pair. With `crossing_time` >= 0 also locates the cost level where the
/// unadjusted sell boundary crosses x_M at that time (pairs must be ordered
/// by increasing cost) and asserts that one exists when `expect_crossing`.
[[nodiscard]] inline SweepReport check_bracketing(const ModelParams& base, const std::vector<CostParams>& pairs,
                                                  const AnalysisOptions& o, double crossing_time = -1.0,
                                                  bool expect_crossing = false) {
    if (pairs.empty()) throw usage_error("bracketing needs at least one cost pair");
    SweepReport rep;
    rep.name = "merton-bracketing";
    rep.axis = "cost";
    rep.fixed = base;
    std::vector<ModelParams> points;
    for (const auto& c : pairs) {
        auto p = base;
        p.costs = c;
        require_valid(p);
        points.push_back(p);
        rep.grid.push_back(c.lambda == c.mu ? c.lambda : static_cast<double>(rep.grid.size()));
    }
    rep.curves = detail::curves_for(points, o);
    const double xm = merton_line(base.market);
    const double tol = 2.0 * rep.curves.front().h;

    double sell_worst = 0.0, buy_worst = 0.0, contain_worst = 0.0;
    std::string sell_at, buy_at;
    for (std::size_t j = 0; j < rep.curves.size(); ++j) {
        const auto& c = rep.curves[j];
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (c.sell_adjusted[k] - xm > sell_worst) {
                sell_worst = c.sell_adjusted[k] - xm;
                sell_at = "cost " + detail::fmt(rep.grid[j]) + ", t = " + detail::fmt(c.times[k]);
            }
            if (!c.buy_truncated[k] && xm - c.buy_adjusted[k] > buy_worst) {
                buy_worst = xm - c.buy_adjusted[k];
                buy_at = "cost " + detail::fmt(rep.grid[j]) + ", t = " + detail::fmt(c.times[k]);
            }
            if (xm >= 0.0) {
                contain_worst = std::max({contain_worst, c.sell_orig[k] - xm,
                                          c.buy_truncated[k] ? 0.0 : xm - c.buy_orig[k]});
            }
        }
    }
    rep.assertions.push_back(make_assertion("merton-bracketing", "x_s / (1 - mu) <= x_M", sell_worst, tol, sell_at));
    rep.assertions.push_back(make_assertion("merton-bracketing", "x_M <= x_b / (1 + lambda)", buy_worst, tol, buy_at));
    if (xm >= 0.0) {
        rep.assertions.push_back(
            make_assertion("merton-bracketing", "x_s <= x_M <= x_b (x_M >= 0)", contain_worst, tol));
    }

    if (crossing_time >= 0.0) {
        std::vector<double> sell_at_t;
        for (const auto& c : rep.curves) sell_at_t.push_back(c.sell_orig[nearest_index(c, crossing_time)]);
        rep.columns.emplace_back("sell_orig_at_t", sell_at_t);
        double crossing = std::numeric_limits<double>::quiet_NaN();
        for (std::size_t j = 1; j < sell_at_t.size(); ++j) {
            const double a = sell_at_t[j - 1] - xm;
            const double b = sell_at_t[j] - xm;
            if (a < 0.0 && b >= 0.0) {
                const double ca = pairs[j - 1].lambda + pairs[j - 1].mu;
                const double cb = pairs[j].lambda + pairs[j].mu;
                crossing = 0.5 * (ca + (cb - ca) * (-a) / (b - a));
                break;
            }
        }
        if (std::isfinite(crossing)) {
            rep.notes.push_back("unadjusted sell boundary crosses x_M near mean cost " + detail::fmt(crossing) +
                                " at t = " + detail::fmt(crossing_time));
        } else {
            rep.notes.push_back("no crossing of x_M by the unadjusted sell boundary at t = " +
                                detail::fmt(crossing_time));
        }
        if (expect_crossing) {
            rep.assertions.push_back(make_assertion(
                "merton-bracketing", "unadjusted sell boundary below x_M at small cost and above at large cost",
                std::isfinite(crossing) ? 0.0 : 1.0, 0.0,
                std::isfinite(crossing) ? "crossing near mean cost " + detail::fmt(crossing) : "no crossing"));
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Terminal limit

/// Grid of refinement level `level` out of `levels`, the last being `finest`.
[[nodiscard]] inline GridConfig refinement_level(const GridConfig& finest, int level, int levels) {
    const int factor = 1 << (levels - 1 - level);
    if ((finest.n_space - 1) % factor != 0 || finest.n_time % factor != 0) {
        throw usage_error("finest grid cannot be coarsened " + std::to_string(factor) + " times");
    }
    GridConfig g = finest;
    g.n_space = (finest.n_space - 1) / factor + 1;
    g.n_time = finest.n_time / factor;
    return g;
}

/// |sell_hat(T - dt) - x_M| on a ladder of grids refined by halving h and dt.
[[nodiscard]] inline SweepReport check_terminal_limit(const ModelParams& base, const CostParams& costs,
                                                      const AnalysisOptions& o, int levels = 4) {
    if (levels < 3) throw usage_error("terminal limit needs at least three refinement levels");
    SweepReport rep;
    rep.name = "terminal-limit";
    rep.axis = "h";
    auto p = base;
    p.costs = costs;
    rep.fixed = p;
    std::vector<ProblemSpec> specs;
    for (int l = 0; l < levels; ++l) {
        auto lo = o;
        lo.grid = refinement_level(o.grid, l, levels);
        specs.push_back(detail::make_spec(Variant::log_consumption_hat, p, lo));
    }
    const auto fields = detail::solve_all(specs, o);
    const double xm = merton_line(base.market);
    std::vector<double> sell, err;
    for (const auto& f : fields) {
        const auto b = extract_slice(*f, f->terminal_index() - 1);
        rep.grid.push_back(f->grid.h);
        sell.push_back(b.sell);
        err.push_back(std::abs(b.sell - xm));
    }
    rep.columns.emplace_back("sell_hat_last_step", sell);
    rep.columns.emplace_back("error", err);

    // Largest rise between levels beyond the two-cell extraction tolerance of
    // the finer level. Sub-cell placement of x_M shifts the error by up to a
    // cell, so strict monotonicity is reported separately as a note.
    double step = -std::numeric_limits<double>::infinity();
    bool strict = true;
    std::string ladder;
    for (std::size_t l = 0; l < err.size(); ++l) {
        if (l > 0) {
            step = std::max(step, err[l] - err[l - 1] - 2.0 * rep.grid[l]);
            strict = strict && err[l] <= err[l - 1];
        }
        ladder += (l ? ", " : "") + detail::fmt(err[l]);
    }
    rep.assertions.push_back(make_assertion("terminal-sell-limit", "error decreases under refinement (2h per level)",
                                            step, 0.0, "errors " + ladder));
    rep.notes.push_back(strict ? "errors strictly decreasing" : "errors not strictly decreasing: " + ladder);
    const double bound = 0.05 * std::abs(xm) + 2.0 * rep.grid.back();
    rep.assertions.push_back(make_assertion("terminal-sell-limit", "finest error <= 0.05 |x_M| + 2h",
                                            err.back(), bound));
    return rep;
}

// ---------------------------------------------------------------------------
// Refinement stability

/// Outcome of comparing the boundaries of one spec with those of the same
/// spec on a grid with h and dt halved. Not a claim about the model, so it
/// reports outside the claim registry.
struct RefinementReport {
    std::string label;
    double h = 0.0;           ///< coarse spacing
    double tolerance = 0.0;   ///< 2h of the coarse grid
    double worst_sell = 0.0;
    double worst_buy = 0.0;
    double worst_time = 0.0;  ///< slice time of the overall worst move
    std::string worst_curve;
    /// |dx/dt| of the worst curve at the worst slice, from the coarse curve.
    double worst_speed = 0.0;
    int slices = 0;
    int failing = 0;          ///< slice/curve pairs moving by 2h or more
    int sentinel_mismatch = 0;
    int skipped = 0;          ///< buy slices in the truncation margin on either grid

    [[nodiscard]] double worst() const { return std::max(worst_sell, worst_buy); }
    [[nodiscard]] bool passed() const { return failing == 0 && sentinel_mismatch == 0; }
};

[[nodiscard]] inline GridConfig refined(const GridConfig& g) {
    auto out = g;
    out.n_space = 2 * (g.n_space - 1) + 1;
    out.n_time = 2 * g.n_time;
    return out;
}

/// Compares every reported boundary of `spec` with its refinement at the
/// shared slices. A move of 2h (coarse) or more fails, as does a buy
/// boundary that is finite on one grid and absent on the other.
[[nodiscard]] inline RefinementReport check_refinement_stability(const ProblemSpec& spec, std::string label,
                                                                 const AnalysisOptions& o) {
    auto fine = spec;
    fine.grid = refined(spec.grid);
    const auto fields = detail::solve_all({spec, fine}, o);
    const auto a = boundaries(*fields[0]);
    const auto b = boundaries(*fields[1]);
    const bool stationary = fields[0]->stationary;
    const std::size_t stride = stationary ? 1 : 2;

    RefinementReport r;
    r.label = std::move(label);
    r.h = a.h;
    r.tolerance = 2.0 * a.h;
    r.slices = static_cast<int>(a.size());
    const auto speed = [&](const std::vector<double>& c, std::size_t k) {
        if (stationary || a.size() < 2) return 0.0;
        const std::size_t lo = k == 0 ? 0 : k - 1;
        const std::size_t hi = std::min(k + 1, a.size() - 1);
        const double dx = c[hi] - c[lo];
        return std::isfinite(dx) ? std::abs(dx) / (a.times[hi] - a.times[lo]) : 0.0;
    };
    const auto consider = [&](double move, std::size_t k, const char* curve,
                              const std::vector<double>& c, double& worst) {
        if (move >= r.tolerance) ++r.failing;
        worst = std::max(worst, move);
        if (move >= r.worst()) {
            r.worst_time = a.times[k];
            r.worst_curve = curve;
            r.worst_speed = speed(c, k);
        }
    };
    for (std::size_t k = 0; k < a.size(); ++k) {
        const std::size_t kf = k * stride;
        consider(std::abs(a.sell_hat[k] - b.sell_hat[kf]), k, "sell", a.sell_hat, r.worst_sell);
        if (a.buy_truncated[k] || b.buy_truncated[kf]) {
            ++r.skipped;
            continue;
        }
        const bool ia = std::isinf(a.buy_hat[k]);
        const bool ib = std::isinf(b.buy_hat[kf]);
        if (ia != ib) {
            ++r.sentinel_mismatch;
        } else if (!ia) {
            consider(std::abs(a.buy_hat[k] - b.buy_hat[kf]), k, "buy", a.buy_hat, r.worst_buy);
        }
    }
    return r;
}

// ---------------------------------------------------------------------------
// Large merged cost

struct LargeThetaResult {
    SweepReport report;
    double plateau_theta = std::numeric_limits<double>::quiet_NaN();
};

/// Locates the plateau of the sell boundary in theta, checks the sign
/// pattern on it, checks that the sell boundary ignores the buy cost there
/// (lambda varied at the base mu), and compares the buy boundary with the
/// infinite-horizon one.
[[nodiscard]] inline LargeThetaResult check_large_theta(const ModelParams& base,
                                                        const std::vector<double>& theta_grid,
                                                        const std::vector<double>& lambda_variations,
                                                        const AnalysisOptions& o) {
    const auto& m = base.market;
    if (!(m.excess_return() - m.sigma * m.sigma > 0.0)) {
        throw usage_error("large-theta check requires alpha - r - sigma^2 > 0");
    }
    if (!(m.beta <= 1.0)) throw usage_error("large-theta check requires beta <= 1");
    detail::require_increasing(theta_grid, "theta grid");

    LargeThetaResult out;
    auto& rep = out.report;
    rep.name = "large-theta";
    rep.axis = "theta";
    rep.grid = theta_grid;
    rep.fixed = base;
    std::vector<ModelParams> points;
    for (double th : theta_grid) {
        auto p = base;
        p.costs = CostParams::from_theta(th);
        points.push_back(p);
    }
    rep.curves = detail::curves_for(points, o);
    const double tol = 2.0 * rep.curves.front().h;

    // sup_t |change of x_s| between consecutive theta values
    std::vector<double> jumps(theta_grid.size(), 0.0);
    for (std::size_t j = 1; j < rep.curves.size(); ++j) {
        for (std::size_t k = 0; k < rep.curves[j].size(); ++k) {
            jumps[j] = std::max(jumps[j], std::abs(rep.curves[j].sell_orig[k] - rep.curves[j - 1].sell_orig[k]));
        }
    }
    rep.columns.emplace_back("sell_jump_from_previous", jumps);
    std::size_t start = theta_grid.size();
    for (std::size_t j = theta_grid.size() - 1; j >= 1; --j) {
        if (jumps[j] >= tol) break;
        start = j - 1;
    }
    const bool found = start + 1 < theta_grid.size();
    rep.assertions.push_back(make_assertion("large-theta-sell-independence", "theta plateau of the sell boundary exists",
                                            found ? 0.0 : jumps.back(), found ? 0.0 : tol,
                                            found ? "plateau from theta = " + detail::fmt(theta_grid[start]) : "none"));
    if (!found) return out;
    out.plateau_theta = theta_grid[start];

    // max(x_s, -x_b) over the plateau; negative means both signs hold
    double sign_worst = -std::numeric_limits<double>::infinity();
    for (std::size_t j = start; j < rep.curves.size(); ++j) {
        const auto& c = rep.curves[j];
        for (std::size_t k = 0; k < c.size(); ++k) {
            sign_worst = std::max({sign_worst, c.sell_orig[k], -c.buy_orig[k]});
        }
    }
    rep.assertions.push_back(make_assertion("large-theta-sell-independence", "x_s < 0 < x_b on the plateau",
                                            sign_worst, 0.0));

    // lambda varied at the base mu, restricted to the plateau
    std::vector<ModelParams> varied;
    std::vector<double> used;
    for (double lam : lambda_variations) {
        auto p = base;
        p.costs.lambda = lam;
        if (p.costs.theta() >= out.plateau_theta) {
            varied.push_back(p);
            used.push_back(lam);
        }
    }
    if (varied.size() < 2) {
        rep.assertions.push_back(make_assertion("large-theta-sell-independence",
                                                "sell boundary independent of lambda on the plateau", 1.0, 0.0,
                                                "fewer than two lambda values reach the plateau"));
    } else {
        const auto vc = detail::curves_for(varied, o);
        double spread = 0.0;
        for (std::size_t j = 1; j < vc.size(); ++j) {
            for (std::size_t k = 0; k < vc[j].size(); ++k) {
                spread = std::max(spread, std::abs(vc[j].sell_orig[k] - vc[0].sell_orig[k]));
            }
        }
        std::string lams;
        for (std::size_t j = 0; j < used.size(); ++j) lams += (j ? ", " : "") + detail::fmt(used[j]);
        rep.assertions.push_back(make_assertion("large-theta-sell-independence",
                                                "sell boundary independent of lambda on the plateau", spread,
                                                2.0 * vc.front().h,
                                                "lambda in {" + lams + "} at mu = " + detail::fmt(base.costs.mu)));
    }

    // buy boundary against the stationary problem on every plateau theta
    std::vector<ProblemSpec> stationary;
    for (std::size_t j = start; j < theta_grid.size(); ++j) {
        stationary.push_back(detail::make_spec(Variant::infinite_horizon_log, points[j], o));
    }
    const auto fields = detail::solve_all(stationary, o);
    double worst = 0.0;
    std::string where;
    std::vector<double> buy_star(theta_grid.size(), std::numeric_limits<double>::quiet_NaN());
    std::vector<double> sell_star(theta_grid.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t s = 0; s < fields.size(); ++s) {
        const std::size_t j = start + s;
        const auto star = extract_slice(*fields[s], 0);
        buy_star[j] = star.buy;
        sell_star[j] = star.sell;
        const auto& c = rep.curves[j];
        for (std::size_t k = 0; k < c.size(); ++k) {
            if (c.buy_truncated[k]) continue;
            const double d = star.buy - c.buy_hat[k];
            if (d > worst) {
                worst = d;
                where = "theta = " + detail::fmt(theta_grid[j]) + ", t = " + detail::fmt(c.times[k]);
            }
        }
        rep.notes.push_back("theta = " + detail::fmt(theta_grid[j]) + ": stationary sell " +
                            detail::fmt(star.sell) + " vs finite-horizon sell at t = 0 " +
                            detail::fmt(c.sell_hat.front()));
    }
    rep.columns.emplace_back("stationary_buy", buy_star);
    rep.columns.emplace_back("stationary_sell", sell_star);
    rep.assertions.push_back(make_assertion("buy-above-infinite-horizon", "x_b(t) >= x_b* on the plateau", worst,
                                            tol, where));
    return out;
}

// ---------------------------------------------------------------------------
// CRRA parameter monotonicity

enum class CrraAxis { risk_premium, risk_aversion, sigma_fixed_ratio };

[[nodiscard]] inline std::string_view to_string(CrraAxis a) {
    switch (a) {
        case CrraAxis::risk_premium: return "risk_premium";
        case CrraAxis::risk_aversion: return "risk_aversion";
        case CrraAxis::sigma_fixed_ratio: return "sigma_fixed_ratio";
    }
    return "?";
}

/// Sweeps one CRRA parameter. Axis values are alpha - r, 1 - gamma or sigma;
/// for sigma the premium is rescaled to keep (alpha - r) / sigma^2 at its
/// base value.
[[nodiscard]] inline SweepReport check_param_monotonicity(const ModelParams& base, CrraAxis axis,
                                                          const std::vector<double>& values,
                                                          const AnalysisOptions& o) {
    if (base.utility.kind != UtilityKind::crra_no_consumption) {
        throw usage_error("parameter monotonicity is checked on the CRRA problem");
    }
    detail::require_increasing(values, "axis values");
    SweepReport rep;
    rep.name = "crra-" + std::string(to_string(axis));
    rep.axis = std::string(to_string(axis));
    rep.grid = values;
    rep.fixed = base;
    const double ratio = base.market.excess_return() / (base.market.sigma * base.market.sigma);
    std::vector<ModelParams> points;
    for (double v : values) {
        auto p = base;
        switch (axis) {
            case CrraAxis::risk_premium: p.market.alpha = p.market.r + v; break;
            case CrraAxis::risk_aversion: p.utility.gamma = 1.0 - v; break;
            case CrraAxis::sigma_fixed_ratio:
                p.market.sigma = v;
                p.market.alpha = p.market.r + ratio * v * v;
                break;
        }
        require_valid(p);
        points.push_back(p);
    }
    rep.curves = detail::curves_for(points, o);
    const Trend trend = axis == CrraAxis::risk_aversion ? Trend::nondecreasing : Trend::nonincreasing;
    const std::string claim = axis == CrraAxis::risk_premium    ? "crra-decreasing-in-risk-premium"
                              : axis == CrraAxis::risk_aversion ? "crra-increasing-in-risk-aversion"
                                                                : "crra-decreasing-in-sigma";
    const std::string dir = trend == Trend::nonincreasing ? "nonincreasing" : "nondecreasing";
    rep.assertions.push_back(detail::trend_assertion(rep, &BoundaryCurves::sell_orig, trend, claim,
                                                     "x_s " + dir + " in " + rep.axis, false));
    rep.assertions.push_back(detail::trend_assertion(rep, &BoundaryCurves::buy_orig, trend, claim,
                                                     "x_b " + dir + " in " + rep.axis, true));
    return rep;
}

// ---------------------------------------------------------------------------
// Invariants

/// Folds invariant reports of many fields into one assertion per check.
class InvariantCollector {
public:
    void add(const SolutionField& f) {
        const auto rep = run_invariant_suite(f);
        std::lock_guard lock(mutex_);
        ++fields_;
        for (const auto& c : rep.checks) {
            if (!c.applicable) continue;
            auto& slot = worst_[c.name];
            if (slot.count == 0 || c.worst - c.tolerance > slot.worst - slot.tolerance) {
                slot.worst = c.worst;
                slot.tolerance = c.tolerance;
                slot.where = std::string(to_string(f.spec.variant)) + " spec " + hex64(spec_hash(f.spec)) +
                             ", t = " + format_value(f.time(std::max(c.worst_slice, 0))) +
                             ", x = " + format_value(c.worst_x);
            }
            ++slot.count;
        }
    }

    [[nodiscard]] std::vector<Assertion> assertions() const {
        std::lock_guard lock(mutex_);
        std::vector<Assertion> out;
        for (const auto& [name, s] : worst_) {
            out.push_back(make_assertion("inv-" + name, name + " on " + std::to_string(s.count) + " fields",
                                         s.worst, s.tolerance, "worst: " + s.where));
        }
        return out;
    }

    [[nodiscard]] int fields() const {
        std::lock_guard lock(mutex_);
        return fields_;
    }

private:
    struct Slot {
        double worst = 0.0;
        double tolerance = 0.0;
        int count = 0;
        std::string where;
    };
    mutable std::mutex mutex_;
    std::map<std::string, Slot> worst_;
    int fields_ = 0;
};

}  // namespace mertc
