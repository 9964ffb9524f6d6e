#pragma once

// Path simulation of the boundary policy for the log-utility investor.
//
// State is kept in bid-frame units: X is the bond account and Yb = (1 - mu) Y
// the liquidation value of the stock position, so the ratio X / Yb is the
// hat coordinate the field and the curves are expressed in. Trades reflect
// the ratio onto the current boundary at step starts; consumption follows
// the feedback c = Yb / (g(t) v(X / Yb, t)) read from the solved field.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "mertc/boundary.hpp"
#include "mertc/cache.hpp"
#include "mertc/error.hpp"
#include "mertc/params.hpp"
#include "mertc/solver.hpp"

namespace mertc {

struct SimConfig {
    int n_paths = 50000;
    int n_steps = 2000;  ///< simulation step dt = T / n_steps
    std::uint64_t seed = 20240601;
    double x0 = 1.0;  ///< initial bond holding
    double y0 = 0.0;  ///< initial stock holding (dollar value)
    int workers = 1;
    bool keep_paths = false;  ///< retain per-path utilities in the result
};

[[nodiscard]] inline std::vector<Violation> validate(const SimConfig& s, const CostParams& c) {
    std::vector<Violation> out;
    if (s.n_paths < 2) out.push_back({"n_paths", "at least two paths required"});
    if (s.n_steps < 1) out.push_back({"n_steps", "at least one step required"});
    if (!(s.y0 >= 0.0)) out.push_back({"y0", "y0 >= 0 required"});
    if (!(s.x0 + (1.0 - c.mu) * s.y0 > 0.0)) {
        out.push_back({"x0", "initial liquidation wealth x0 + (1 - mu) y0 must be positive"});
    }
    if (s.workers < 1) out.push_back({"workers", "at least one worker required"});
    return out;
}

struct SimulationResult {
    double mean = 0.0;       ///< estimate of the expected discounted utility
    double std_error = 0.0;
    int n_paths = 0;
    int n_steps = 0;
    /// Pre-trade position of every (path, step) observation.
    double frac_sell = 0.0;
    double frac_hold = 0.0;
    double frac_buy = 0.0;
    double mean_sold = 0.0;    ///< stock sold per path, dollar value before costs
    double mean_bought = 0.0;  ///< stock bought per path, dollar value before costs
    double mean_trades = 0.0;  ///< trade events per path
    /// Largest distance of a post-trade ratio outside [sell, buy]; zero up to rounding.
    double max_excursion = 0.0;
    int insolvent_paths = 0;
    std::vector<double> path_utility;
};

namespace mc_detail {

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Compensated (Neumaier) accumulator.
struct Sum {
    double s = 0.0;
    double c = 0.0;
    void add(double v) {
        const double t = s + v;
        c += std::abs(s) >= std::abs(v) ? (s - t) + v : (v - t) + s;
        s = t;
    }
    [[nodiscard]] double value() const { return s + c; }
};

struct PathOutcome {
    double utility = 0.0;
    double sold = 0.0;
    double bought = 0.0;
    int trades = 0;
    int sell_steps = 0;
    int buy_steps = 0;
    double excursion = 0.0;
    bool insolvent = false;
};

/// Step-invariant quantities shared by all paths.
struct Plan {
    double dt = 0.0;
    double theta = 0.0;
    double mu = 0.0;
    double growth = 0.0;         ///< e^{r dt}
    double annuity = 0.0;        ///< (e^{r dt} - 1) / r
    double log_drift = 0.0;      ///< (alpha - sigma^2 / 2) dt
    double log_vol = 0.0;        ///< sigma sqrt(dt)
    double bond_drift = 0.0;     ///< (r - beta) dt, all-bond path
    std::vector<int> slice;      ///< field slice used at each step start
    std::vector<double> g;       ///< g(t_n), n = 0..N
    std::vector<double> weight;  ///< integral of e^{-beta s} over step n
    std::vector<double> moment;  ///< integral of e^{-beta s} (s - t_n) over step n
    double terminal_weight = 0.0;
};

inline Plan make_plan(const SolutionField& f, const SimConfig& sim) {
    const auto& m = f.spec.params.market;
    Plan p;
    const int n = sim.n_steps;
    p.dt = m.T / n;
    p.theta = f.spec.params.costs.theta();
    p.mu = f.spec.params.costs.mu;
    p.growth = std::exp(m.r * p.dt);
    p.annuity = m.r != 0.0 ? std::expm1(m.r * p.dt) / m.r : p.dt;
    p.log_drift = (m.alpha - 0.5 * m.sigma * m.sigma) * p.dt;
    p.log_vol = m.sigma * std::sqrt(p.dt);
    p.bond_drift = (m.r - m.beta) * p.dt;
    p.slice.resize(n);
    p.g.resize(n + 1);
    p.weight.resize(n);
    p.moment.resize(n);
    const int last = f.terminal_index() - 1;
    for (int k = 0; k <= n; ++k) p.g[k] = discount_factor(m, std::min(k * p.dt, m.T));
    const double b = m.beta;
    const double e = -std::expm1(-b * p.dt);  // 1 - e^{-beta dt}
    for (int k = 0; k < n; ++k) {
        const double t = k * p.dt;
        // latest grid time at or before t
        p.slice[k] = std::min(static_cast<int>(std::floor(t / f.grid.dt + 1e-9)), last);
        const double d = std::exp(-b * t);
        p.weight[k] = d * e / b;
        // int_0^dt e^{-beta u} u du = (1 - e^{-beta dt} (1 + beta dt)) / beta^2
        p.moment[k] = d * (e - b * p.dt * (1.0 - e)) / (b * b);
    }
    p.terminal_weight = std::exp(-b * m.T);
    return p;
}

/// v at bid-frame ratio `xh` on slice `k`: linear in x inside the grid, the
/// obstacle of the adjacent trading region outside it.
inline double field_value(const SolutionField& f, int k, double xh, double theta) {
    const auto& x = f.grid.x;
    if (xh <= x.front()) return 1.0 / (xh + 1.0);
    if (xh >= x.back()) return 1.0 / (xh + theta);
    const double pos = (xh - x.front()) / f.grid.h;
    const auto i = std::min(static_cast<std::size_t>(pos), x.size() - 2);
    const double w = pos - static_cast<double>(i);
    return (1.0 - w) * f.at(i, k) + w * f.at(i + 1, k);
}

inline PathOutcome simulate_path(const SolutionField& f, const BoundaryCurves& curves, const Plan& p,
                                 const SimConfig& sim, std::uint64_t path) {
    std::mt19937_64 rng(splitmix64(sim.seed ^ splitmix64(path)));
    std::normal_distribution<double> normal;
    PathOutcome out;
    double bond = sim.x0;
    double stock = (1.0 - p.mu) * sim.y0;  // bid-frame stock value
    const int n = sim.n_steps;
    for (int step = 0; step < n; ++step) {
        const int k = p.slice[step];
        const double sell = curves.sell_hat[k];
        const double buy = curves.buy_hat[k];

        // reflection onto the band; an empty stock position reads as +inf
        const double ratio = stock > 0.0 ? bond / stock : std::numeric_limits<double>::infinity();
        if (ratio < sell) {
            const double amount = (sell * stock - bond) / (1.0 + sell);
            bond += amount;
            stock -= amount;
            out.sold += amount / (1.0 - p.mu);
            ++out.trades;
            ++out.sell_steps;
        } else if (ratio > buy) {
            const double amount = (bond - buy * stock) / (p.theta + buy);
            bond -= p.theta * amount;
            stock += amount;
            out.bought += amount / (1.0 - p.mu);
            ++out.trades;
            ++out.buy_steps;
        }
        if (stock > 0.0) {
            const double after = bond / stock;
            out.excursion = std::max({out.excursion, sell - after, std::isfinite(buy) ? after - buy : 0.0});
        }

        const double z = normal(rng);  // drawn on every step to keep paths aligned across policies
        if (!(bond + stock > 0.0)) {
            out.insolvent = true;
            return out;
        }
        if (stock > 0.0) {
            const double v = field_value(f, k, bond / stock, p.theta);
            const double c = stock / (p.g[step] * v);
            out.utility += p.weight[step] * std::log(c);
            bond = bond * p.growth - c * p.annuity;
            stock *= std::exp(p.log_drift + p.log_vol * z);
        } else {
            // all-bond path between trades: c = X / g grows at rate r - beta exactly
            const double c = bond / p.g[step];
            out.utility += p.weight[step] * std::log(c) + (p.bond_drift / p.dt) * p.moment[step];
            bond *= std::exp(p.bond_drift) * p.g[step + 1] / p.g[step];
        }
    }
    const double wealth = bond + stock;
    if (!(wealth > 0.0)) {
        out.insolvent = true;
        return out;
    }
    out.utility += p.terminal_weight * std::log(wealth);
    return out;
}

inline void require_policy_inputs(const BoundaryCurves& curves, const SolutionField& f) {
    if (f.spec.variant != Variant::log_consumption_hat || f.stationary) {
        throw usage_error("simulation needs a finite-horizon log-utility field");
    }
    if (curves.size() != static_cast<std::size_t>(f.terminal_index())) {
        throw usage_error("boundary curves do not match the field's time grid");
    }
    for (std::size_t k = 0; k < curves.size(); ++k) {
        if (!(curves.sell_hat[k] > -1.0 && curves.sell_hat[k] < curves.buy_hat[k])) {
            throw usage_error("policy needs -1 < sell < buy on every slice; slice " + std::to_string(k) +
                              " has sell " + format_value(curves.sell_hat[k]) + ", buy " +
                              format_value(curves.buy_hat[k]));
        }
    }
}

}  // namespace mc_detail

/// Simulates the policy given by `curves` (bid-frame boundaries) with
/// consumption read from `field`. Paths are independent and seeded from
/// (seed, path index), so results do not depend on the worker count.
/// Throws a solver error if any path loses solvency.
[[nodiscard]] inline SimulationResult simulate_policy(const BoundaryCurves& curves, const SolutionField& field,
                                                      const SimConfig& sim) {
    mc_detail::require_policy_inputs(curves, field);
    if (const auto v = validate(sim, field.spec.params.costs); !v.empty()) {
        std::string msg = "invalid simulation config:";
        for (const auto& e : v) msg += "\n  " + e.field + ": " + e.message;
        throw config_error(msg);
    }
    const auto plan = mc_detail::make_plan(field, sim);
    const auto n = static_cast<std::size_t>(sim.n_paths);
    std::vector<mc_detail::PathOutcome> paths(n);
    constexpr std::size_t batch = 512;
    const std::size_t batches = (n + batch - 1) / batch;
    (void)parallel_map(batches, sim.workers, [&](std::size_t b) {
        const std::size_t end = std::min(n, (b + 1) * batch);
        for (std::size_t i = b * batch; i < end; ++i) {
            paths[i] = mc_detail::simulate_path(field, curves, plan, sim, i);
        }
        return 0;
    });

    SimulationResult r;
    r.n_paths = sim.n_paths;
    r.n_steps = sim.n_steps;
    for (const auto& p : paths) r.insolvent_paths += p.insolvent ? 1 : 0;
    if (r.insolvent_paths > 0) {
        throw solver_error("policy lost solvency on " + std::to_string(r.insolvent_paths) + " of " +
                           std::to_string(n) + " paths");
    }
    mc_detail::Sum total, sold, bought;
    long trades = 0, sells = 0, buys = 0;
    for (const auto& p : paths) {
        total.add(p.utility);
        sold.add(p.sold);
        bought.add(p.bought);
        trades += p.trades;
        sells += p.sell_steps;
        buys += p.buy_steps;
        r.max_excursion = std::max(r.max_excursion, p.excursion);
    }
    const double count = static_cast<double>(n);
    r.mean = total.value() / count;
    mc_detail::Sum squares;
    for (const auto& p : paths) squares.add((p.utility - r.mean) * (p.utility - r.mean));
    r.std_error = std::sqrt(squares.value() / (count - 1.0) / count);
    const double observations = count * sim.n_steps;
    r.frac_sell = static_cast<double>(sells) / observations;
    r.frac_buy = static_cast<double>(buys) / observations;
    r.frac_hold = 1.0 - r.frac_sell - r.frac_buy;
    r.mean_sold = sold.value() / count;
    r.mean_bought = bought.value() / count;
    r.mean_trades = static_cast<double>(trades) / count;
    if (sim.keep_paths) {
        r.path_utility.reserve(n);
        for (const auto& p : paths) r.path_utility.push_back(p.utility);
    }
    return r;
}

// ---------------------------------------------------------------------------
// Perturbations

/// Moves both boundaries by a relative amount in 1 + x:
/// x -> -1 + (1 + delta)(1 + x). Unlike a plain translation this keeps the
/// sell boundary above the insolvency ratio -1; +inf stays +inf.
[[nodiscard]] inline BoundaryCurves shift_curves(const BoundaryCurves& c, double delta) {
    if (!(delta > -1.0)) throw usage_error("shift must exceed -1");
    auto out = c;
    const auto move = [&](double x) { return std::isinf(x) ? x : -1.0 + (1.0 + delta) * (1.0 + x); };
    for (std::size_t k = 0; k < c.size(); ++k) {
        out.sell_hat[k] = move(c.sell_hat[k]);
        out.buy_hat[k] = move(c.buy_hat[k]);
        if (!(out.sell_hat[k] < out.buy_hat[k])) throw usage_error("shift produces sell >= buy");
    }
    return out;
}

/// Replaces the band by a narrow one around the frictionless ratio, with
/// half-width `half_width` in log(1 + x): trading almost continuously.
[[nodiscard]] inline BoundaryCurves collapse_curves(const BoundaryCurves& c, double merton, double half_width = 0.01) {
    if (!(merton > -1.0) || !(half_width > 0.0)) throw usage_error("collapse needs merton > -1 and a positive width");
    auto out = c;
    const double lo = -1.0 + (1.0 + merton) * std::exp(-half_width);
    const double hi = -1.0 + (1.0 + merton) * std::exp(half_width);
    std::fill(out.sell_hat.begin(), out.sell_hat.end(), lo);
    std::fill(out.buy_hat.begin(), out.buy_hat.end(), hi);
    return out;
}

struct PerturbationRow {
    std::string label;
    double shift = 0.0;  ///< NaN for the collapsed band
    SimulationResult result;
    double gap = 0.0;       ///< mean(row) - mean(unshifted)
    double gap_error = 0.0;  ///< standard error of the paired difference
};

struct PerturbationStudy {
    std::vector<PerturbationRow> rows;
    std::size_t base = 0;  ///< row of the unshifted policy
    std::size_t best = 0;  ///< row with the largest mean among the shifts
    /// best mean - base mean <= 2 standard errors of the base estimate
    bool base_within_two_se = false;
    /// collapsed band below the base by more than two paired standard errors
    bool collapse_worse = false;
    bool has_collapse = false;
};

/// Runs every shift (and optionally the collapsed band) on the same random
/// numbers. `shifts` must contain 0.
[[nodiscard]] inline PerturbationStudy perturbation_study(const BoundaryCurves& curves, const SolutionField& field,
                                                          SimConfig sim, const std::vector<double>& shifts,
                                                          bool with_collapse = true) {
    const auto zero = std::find(shifts.begin(), shifts.end(), 0.0);
    if (zero == shifts.end()) throw usage_error("perturbation shifts must include 0");
    sim.keep_paths = true;
    PerturbationStudy st;
    for (double d : shifts) {
        st.rows.push_back({"shift " + format_value(d), d, simulate_policy(shift_curves(curves, d), field, sim)});
    }
    if (with_collapse) {
        const double xm = merton_line(field.spec.params.market);
        st.rows.push_back({"collapsed band", std::numeric_limits<double>::quiet_NaN(),
                           simulate_policy(collapse_curves(curves, xm), field, sim)});
        st.has_collapse = true;
    }
    st.base = static_cast<std::size_t>(zero - shifts.begin());
    const auto& base = st.rows[st.base].result;
    const double count = static_cast<double>(sim.n_paths);
    for (auto& row : st.rows) {
        const auto& u = row.result.path_utility;
        mc_detail::Sum d;
        for (std::size_t i = 0; i < u.size(); ++i) d.add(u[i] - base.path_utility[i]);
        row.gap = d.value() / count;
        mc_detail::Sum sq;
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double e = u[i] - base.path_utility[i] - row.gap;
            sq.add(e * e);
        }
        row.gap_error = std::sqrt(sq.value() / (count - 1.0) / count);
    }
    for (std::size_t i = 0; i < shifts.size(); ++i) {
        if (st.rows[i].result.mean > st.rows[st.best].result.mean) st.best = i;
    }
    st.base_within_two_se = st.rows[st.best].result.mean - base.mean <= 2.0 * base.std_error;
    if (with_collapse) {
        const auto& c = st.rows.back();
        st.collapse_worse = c.gap < -2.0 * c.gap_error;
    }
    return st;
}

inline void write_path_csv(std::ostream& os, const SimulationResult& r) {
    os << "path,utility\n";
    char buf[32];
    for (std::size_t i = 0; i < r.path_utility.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", r.path_utility[i]);
        os << i << ',' << buf << '\n';
    }
}

}  // namespace mertc
