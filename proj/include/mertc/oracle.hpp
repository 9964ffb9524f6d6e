#pragma once

// Brute-force cross-check for the implicit solver: explicit Euler backward in
// time with the nonlinear terms evaluated at the known slice, followed by
// projection onto the obstacle interval. The spatial stencil is the same
// central scheme with Peclet-limited diffusion as the implicit solver (so the
// two agree to time discretization error), but the code is written from the PDE directly and
// shares only the grid layout, the obstacle formulas and the field type.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mertc/error.hpp"
#include "mertc/problem.hpp"
#include "mertc/solver.hpp"

namespace mertc {

struct OracleConfig {
    int max_nodes = 401;
    /// Fraction of the stability bound used as the explicit step.
    double cfl_fraction = 0.9;
    /// Stationary variant: pseudo-time horizon cap, in units of 1/beta.
    double max_relaxation_time = 400.0;
};

namespace oracle_detail {

struct Coeffs {
    double a;  // multiplies v_xx
    double b;  // multiplies v_x
    double c;  // multiplies v
    double s;  // explicit source from nonlinear terms
};

inline double horizon_weight(const MarketParams& m, double t) {
    const double s = m.T - t;
    const double decay = std::exp(-m.beta * s);
    return 1.0 / ((1.0 - decay) / m.beta + decay);
}

// Right-hand side of  v_t = -(L1 v - A1 v)  written as  a v_xx + b v_x + c v + s.
inline Coeffs coeffs(const ProblemSpec& spec, double x, double v, double t) {
    const auto& m = spec.params.market;
    const double s2 = m.sigma * m.sigma;
    const double p = m.alpha - m.r;
    Coeffs k{0.5 * s2 * x * x, 0.0, 0.0, 0.0};
    if (spec.variant == Variant::crra_no_consumption) {
        const double g = spec.params.utility.gamma;
        k.b = -(p - (2.0 - g) * s2) * x + g * s2 * x * x * v;
        k.c = -(p - (1.0 - g) * s2);
        k.s = g * s2 * x * v * v;
    } else {
        const double w =
            spec.variant == Variant::infinite_horizon_log ? m.beta : horizon_weight(m, t);
        k.b = -(p - 2.0 * s2) * x - w / v;
        k.c = -(p - s2) - w;
    }
    return k;
}

// v_xx coefficient of the stencil: a, raised to |b| h / 2 where the central
// first difference would otherwise give a negative neighbour weight.
inline double fitted(double a, double b, double h) {
    const double floor = std::abs(b) * h / 2.0;
    return a < floor ? floor : a;
}

// Largest explicit step that keeps the update a convex combination of the
// neighbours, bounded over v in [lower, upper].
inline double stable_step(const ProblemSpec& spec, const std::vector<double>& x, double h,
                          const std::vector<double>& lo, const std::vector<double>& hi,
                          double t_lo, double t_hi) {
    double worst = 0.0;
    for (std::size_t i = 1; i + 1 < x.size(); ++i) {
        for (double v : {lo[i], hi[i]}) {
            for (double t : {t_lo, t_hi}) {
                const auto k = coeffs(spec, x[i], v, t);
                worst = std::max(worst, 2.0 * fitted(k.a, k.b, h) / (h * h) + std::abs(k.c));
            }
        }
    }
    return 1.0 / worst;
}

inline void explicit_step(const ProblemSpec& spec, const std::vector<double>& x, double h,
                          const std::vector<double>& cur, std::vector<double>& next, double t,
                          double dt, const std::vector<double>& lo, const std::vector<double>& hi) {
    const std::size_t n = x.size();
    next.front() = hi.front();
    next.back() = lo.back();
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const auto k = coeffs(spec, x[i], cur[i], t);
        const double vxx = (cur[i + 1] - 2.0 * cur[i] + cur[i - 1]) / (h * h);
        const double vx = (cur[i + 1] - cur[i - 1]) / (2.0 * h);
        const double rate = fitted(k.a, k.b, h) * vxx + k.b * vx + k.c * cur[i] + k.s;
        next[i] = std::min(std::max(cur[i] + dt * rate, lo[i]), hi[i]);
    }
}

inline void flag(const std::vector<double>& v, const std::vector<double>& lo,
                 const std::vector<double>& hi, std::span<Contact> out) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = v[i] >= hi[i] - contact_slack   ? Contact::upper
                 : v[i] <= lo[i] + contact_slack ? Contact::lower
                                                 : Contact::interior;
    }
}

}  // namespace oracle_detail

/// Solves `spec` with the explicit scheme. Output slices sit on the same time
/// grid as the implicit solver; each output step is split into as many
/// explicit substeps as stability requires.
[[nodiscard]] inline SolutionField oracle_solve(const ProblemSpec& spec, const OracleConfig& cfg = {}) {
    require_valid(spec);
    if (spec.grid.n_space > cfg.max_nodes) {
        throw usage_error("oracle_solve is limited to " + std::to_string(cfg.max_nodes) +
                          " nodes; got " + std::to_string(spec.grid.n_space));
    }
    if (!(cfg.cfl_fraction > 0.0 && cfg.cfl_fraction <= 1.0)) {
        throw usage_error("oracle cfl_fraction must lie in (0, 1]");
    }

    const bool stationary = spec.variant == Variant::infinite_horizon_log;
    SolutionField f;
    f.spec = spec;
    f.grid = make_grid(spec);
    f.stationary = stationary;
    const auto& x = f.grid.x;
    const double h = f.grid.h;
    const std::size_t n = x.size();
    const auto obs = Obstacles::for_spec(spec);
    std::vector<double> lo(n), hi(n);
    for (std::size_t i = 0; i < n; ++i) {
        lo[i] = obs.lower(x[i]);
        hi[i] = obs.upper(x[i]);
    }
    f.lower = lo;
    f.upper = hi;
    const int slices = stationary ? 1 : spec.grid.n_time + 1;
    f.values.assign(static_cast<std::size_t>(slices) * n, 0.0);
    f.contact.assign(static_cast<std::size_t>(slices) * n, Contact::interior);

    std::vector<double> cur = hi;
    cur.back() = lo.back();
    std::vector<double> next(n);
    const double T = spec.params.market.T;

    if (!stationary) {
        const double dt_out = T / spec.grid.n_time;
        const double bound = oracle_detail::stable_step(spec, x, h, lo, hi, 0.0, T);
        const int sub = static_cast<int>(std::ceil(dt_out / (cfg.cfl_fraction * bound)));
        const double dt = dt_out / sub;
        if (dt > bound) throw solver_error("oracle step exceeds the stability bound");
        const int kt = spec.grid.n_time;
        std::copy(hi.begin(), hi.end(), f.slice(kt).begin());
        std::fill(f.contact_slice(kt).begin(), f.contact_slice(kt).end(), Contact::upper);
        cur = hi;
        for (int k = kt - 1; k >= 0; --k) {
            for (int j = 0; j < sub; ++j) {
                const double t = (k + 1) * dt_out - j * dt;
                oracle_detail::explicit_step(spec, x, h, cur, next, t, dt, lo, hi);
                cur.swap(next);
            }
            std::copy(cur.begin(), cur.end(), f.slice(k).begin());
            oracle_detail::flag(cur, lo, hi, f.contact_slice(k));
            f.stats.time_steps += sub;
        }
        return f;
    }

    const double dt = cfg.cfl_fraction * oracle_detail::stable_step(spec, x, h, lo, hi, 0.0, 0.0);
    const long max_steps = static_cast<long>(std::ceil(cfg.max_relaxation_time / spec.params.market.beta / dt));
    bool done = false;
    for (long s = 0; s < max_steps; ++s) {
        oracle_detail::explicit_step(spec, x, h, cur, next, 0.0, dt, lo, hi);
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - cur[i]));
        cur.swap(next);
        ++f.stats.time_steps;
        // per-step change scales with dt; compare the implied rate
        f.stats.final_change = change / dt;
        if (change / dt < spec.solver.steady_state_tol * 1e3) {
            done = true;
            break;
        }
    }
    if (!done) throw solver_error("oracle relaxation did not settle");
    std::copy(cur.begin(), cur.end(), f.slice(0).begin());
    oracle_detail::flag(cur, lo, hi, f.contact_slice(0));
    return f;
}

}  // namespace mertc
