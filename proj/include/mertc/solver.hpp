#pragma once

// Backward-in-time solver for the double obstacle problems: implicit Euler in
// time, Picard iteration on the frozen nonlinear coefficients, projected SOR
// for each linear complementarity problem. The stationary problem reuses the
// same stepper as a pseudo-time relaxation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <span>
#include <string>
#include <vector>

#include "mertc/error.hpp"
#include "mertc/operator.hpp"
#include "mertc/problem.hpp"
#include "mertc/psor.hpp"

namespace mertc {

enum class Contact : std::uint8_t { interior = 0, upper = 1, lower = 2 };

inline constexpr double contact_slack = 1e-12;

struct SolveStats {
    long psor_sweeps = 0;
    int relaxation_fallbacks = 0;  ///< PSOR solves that dropped to omega = 1
    int max_picard_iterations = 0;
    int time_steps = 0;
    double final_change = 0.0;  ///< stationary solves: last sup-norm slice change
    std::vector<std::string> warnings;
};

/// Solution v on the (space x time) grid. Slice k lives at time grid.time(k);
/// the last slice of a finite-horizon solve is the terminal slice. A
/// stationary solve holds a single slice.
struct SolutionField {
    ProblemSpec spec;
    Grid grid;
    bool stationary = false;
    std::vector<double> lower;  ///< lower obstacle per node
    std::vector<double> upper;  ///< upper obstacle per node
    std::vector<double> values;
    std::vector<Contact> contact;
    SolveStats stats;

    [[nodiscard]] std::size_t nodes() const noexcept { return grid.size(); }
    [[nodiscard]] int slices() const noexcept {
        return static_cast<int>(values.size() / std::max<std::size_t>(grid.size(), 1));
    }
    [[nodiscard]] int terminal_index() const noexcept { return slices() - 1; }
    [[nodiscard]] double time(int k) const noexcept { return stationary ? 0.0 : grid.time(k); }

    [[nodiscard]] std::span<const double> slice(int k) const {
        return {values.data() + static_cast<std::size_t>(k) * nodes(), nodes()};
    }
    [[nodiscard]] std::span<double> slice(int k) {
        return {values.data() + static_cast<std::size_t>(k) * nodes(), nodes()};
    }
    [[nodiscard]] std::span<const Contact> contact_slice(int k) const {
        return {contact.data() + static_cast<std::size_t>(k) * nodes(), nodes()};
    }
    [[nodiscard]] std::span<Contact> contact_slice(int k) {
        return {contact.data() + static_cast<std::size_t>(k) * nodes(), nodes()};
    }

    [[nodiscard]] double at(std::size_t i, int k) const { return slice(k)[i]; }
};

/// Flags from a strict comparison against the obstacles with a 1e-12 slack.
inline void classify_contact(std::span<const double> v, std::span<const double> lo,
                             std::span<const double> hi, std::span<Contact> out) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (v[i] >= hi[i] - contact_slack) {
            out[i] = Contact::upper;
        } else if (v[i] <= lo[i] + contact_slack) {
            out[i] = Contact::lower;
        } else {
            out[i] = Contact::interior;
        }
    }
}

/// Builds an empty field with obstacles and the materialized grid.
[[nodiscard]] inline SolutionField make_field(const ProblemSpec& spec, int slices, bool stationary) {
    SolutionField f;
    f.spec = spec;
    f.grid = make_grid(spec);
    f.stationary = stationary;
    const auto obs = Obstacles::for_spec(spec);
    const std::size_t n = f.grid.size();
    f.lower.resize(n);
    f.upper.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        f.lower[i] = obs.lower(f.grid.x[i]);
        f.upper[i] = obs.upper(f.grid.x[i]);
    }
    f.values.assign(static_cast<std::size_t>(slices) * n, 0.0);
    f.contact.assign(static_cast<std::size_t>(slices) * n, Contact::interior);
    return f;
}

namespace detail {

/// Linear system of one implicit step: (I/dt + A) v = prev/dt, with
/// Dirichlet closure v = upper at the left end and v = lower at the right.
struct StepSystem {
    Tridiagonal matrix;
    std::vector<double> rhs;
};

inline StepSystem step_system(const SolutionField& f, std::span<const double> frozen,
                              std::span<const double> prev, double t, double dt) {
    StepSystem s{assemble_operator(f.spec, f.grid.x, frozen, t), std::vector<double>(prev.size())};
    const std::size_t n = prev.size();
    const double inv_dt = 1.0 / dt;
    for (std::size_t i = 1; i + 1 < n; ++i) {
        s.matrix.diag[i] += inv_dt;
        s.rhs[i] = prev[i] * inv_dt;
        if (!(s.matrix.diag[i] > 0.0)) {
            throw solver_error("step matrix lost its positive diagonal at x = " +
                               std::to_string(f.grid.x[i]) + "; reduce the time step");
        }
    }
    s.matrix.diag[0] = 1.0;
    s.rhs[0] = f.upper[0];
    s.matrix.diag[n - 1] = 1.0;
    s.rhs[n - 1] = f.lower[n - 1];
    return s;
}

/// One implicit step: Picard iteration around PSOR. Returns the new slice.
inline void implicit_step(SolutionField& f, std::span<const double> prev, std::span<double> out,
                          double t, double dt, std::span<const double> lo, std::span<const double> hi) {
    const auto& cfg = f.spec.solver;
    const std::size_t n = prev.size();
    std::vector<double> frozen(prev.begin(), prev.end());
    std::vector<double> next(n);
    for (int it = 1; it <= cfg.picard_max_iter; ++it) {
        const auto sys = step_system(f, frozen, prev, t, dt);
        std::copy(frozen.begin(), frozen.end(), next.begin());
        pinned_start(sys.matrix, sys.rhs, lo, hi, next);
        const auto res = psor(sys.matrix, sys.rhs, lo, hi, next, cfg.psor_relaxation, cfg.psor_tol,
                              cfg.psor_max_iter);
        f.stats.psor_sweeps += res.iterations;
        if (res.relaxation_fallback) ++f.stats.relaxation_fallbacks;
        if (!res.converged) {
            char buf[96];
            std::snprintf(buf, sizeof buf, " sweeps at t = %g (last update %.3g)", t, res.last_update);
            throw solver_error("PSOR did not converge within " + std::to_string(cfg.psor_max_iter) + buf);
        }
        double change = 0.0;
        for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - frozen[i]));
        frozen.swap(next);
        if (change < cfg.picard_tol) {
            f.stats.max_picard_iterations = std::max(f.stats.max_picard_iterations, it);
            std::copy(frozen.begin(), frozen.end(), out.begin());
            return;
        }
    }
    throw solver_error("Picard iteration did not converge within " +
                       std::to_string(cfg.picard_max_iter) + " iterations at t = " + std::to_string(t));
}

/// Projection bounds with the Dirichlet closure pinned.
inline void closure_bounds(const SolutionField& f, std::vector<double>& lo, std::vector<double>& hi) {
    lo = f.lower;
    hi = f.upper;
    lo.front() = hi.front() = f.upper.front();
    lo.back() = hi.back() = f.lower.back();
}

/// Width of the band next to x_max inside which a buy boundary is treated
/// as unresolved (the Dirichlet closure dominates there).
[[nodiscard]] inline double right_margin_width(const Grid& g) {
    return 0.05 * (g.x.back() - g.x.front());
}

/// Minimum number of leading nodes the sell contact set has to cover.
inline constexpr std::size_t left_margin_nodes = 3;

inline void check_truncation(SolutionField& f) {
    const std::size_t n = f.nodes();
    const int last = f.stationary ? 1 : f.terminal_index();
    const double margin_start = f.grid.x.back() - right_margin_width(f.grid);
    int right = 0, left = 0;
    for (int k = 0; k < last; ++k) {
        const auto c = f.contact_slice(k);
        std::size_t first_lower = n - 1;
        while (first_lower > 0 && c[first_lower - 1] == Contact::lower) --first_lower;
        if (first_lower + 1 < n && f.grid.x[first_lower] >= margin_start) ++right;
        for (std::size_t i = 0; i < left_margin_nodes && i < n; ++i) {
            if (c[i] != Contact::upper) {
                ++left;
                break;
            }
        }
    }
    // a boundary sweeping through the margin for a few slices is expected
    if (right > std::max(1, last / 50)) {
        f.stats.warnings.push_back("buy contact set sits in the right truncation margin on " +
                                   std::to_string(right) + " slices; enlarge x_max");
    }
    if (left > 0) {
        f.stats.warnings.push_back("sell contact set does not cover the left truncation margin on " +
                                   std::to_string(left) + " slices; move x_min closer to the singularity");
    }
}

}  // namespace detail

/// Solves the configured double obstacle problem.
[[nodiscard]] inline SolutionField solve(const ProblemSpec& spec) {
    require_valid(spec);
    const bool stationary = spec.variant == Variant::infinite_horizon_log;
    SolutionField f = make_field(spec, stationary ? 1 : spec.grid.n_time + 1, stationary);
    const std::size_t n = f.nodes();
    std::vector<double> lo, hi;
    detail::closure_bounds(f, lo, hi);

    if (!stationary) {
        const int kt = f.terminal_index();
        auto terminal = f.slice(kt);
        std::copy(f.upper.begin(), f.upper.end(), terminal.begin());
        std::fill(f.contact_slice(kt).begin(), f.contact_slice(kt).end(), Contact::upper);
        for (int k = kt - 1; k >= 0; --k) {
            detail::implicit_step(f, f.slice(k + 1), f.slice(k), f.grid.time(k), f.grid.dt, lo, hi);
            classify_contact(f.slice(k), f.lower, f.upper, f.contact_slice(k));
            ++f.stats.time_steps;
        }
    } else {
        // pseudo-time relaxation from the upper obstacle; the step grows
        // geometrically since only the fixed point matters
        std::vector<double> cur(f.upper.begin(), f.upper.end());
        cur.back() = f.lower.back();
        std::vector<double> next(n);
        double dtau = spec.params.market.T / spec.grid.n_time;
        const double max_dtau = 5.0;
        bool done = false;
        for (int step = 0; step < spec.solver.steady_state_max_steps; ++step) {
            detail::implicit_step(f, cur, next, 0.0, dtau, lo, hi);
            double change = 0.0;
            for (std::size_t i = 0; i < n; ++i) change = std::max(change, std::abs(next[i] - cur[i]));
            cur.swap(next);
            ++f.stats.time_steps;
            f.stats.final_change = change;
            if (change < spec.solver.steady_state_tol) {
                done = true;
                break;
            }
            dtau = std::min(dtau * 1.2, max_dtau);
        }
        if (!done) {
            throw solver_error("stationary problem did not reach steady state within " +
                               std::to_string(spec.solver.steady_state_max_steps) + " pseudo-steps");
        }
        std::copy(cur.begin(), cur.end(), f.slice(0).begin());
        classify_contact(f.slice(0), f.lower, f.upper, f.contact_slice(0));
    }
    detail::check_truncation(f);
    return f;
}

// ---------------------------------------------------------------------------
// Complementarity residual

struct ResidualReport {
    double max_violation = 0.0;       ///< worst violation relative to the local operator scale
    double max_interior_residual = 0.0;  ///< worst |F| / scale on interior nodes
    int worst_slice = -1;
    std::size_t worst_node = 0;
    std::size_t violating_nodes = 0;  ///< nodes whose relative violation exceeds `tol`
};

/// Discrete residual F = (v^k - v^{k+1}) / dt + A(v^k) v^k on interior nodes,
/// scaled by the sum of the magnitudes of its terms. Contact nodes are held
/// to the sign condition of their obstacle.
[[nodiscard]] inline ResidualReport complementarity_residual(const SolutionField& f, double tol = 1e-6) {
    ResidualReport rep;
    const std::size_t n = f.nodes();
    const int last = f.stationary ? 1 : f.terminal_index();
    for (int k = 0; k < last; ++k) {
        const auto v = f.slice(k);
        const double t = f.time(k);
        const auto op = assemble_operator(f.spec, f.grid.x, v, t);
        const auto contact = f.contact_slice(k);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            double residual = op.apply_row(v, i);
            double scale = std::abs(op.sub[i] * v[i - 1]) + std::abs(op.diag[i] * v[i]) +
                           std::abs(op.super[i] * v[i + 1]);
            if (!f.stationary) {
                const double prev = f.slice(k + 1)[i];
                residual += (v[i] - prev) / f.grid.dt;
                scale += (std::abs(v[i]) + std::abs(prev)) / f.grid.dt;
            }
            const double rel = residual / scale;
            double violation = 0.0;
            switch (contact[i]) {
                case Contact::interior:
                    violation = std::abs(rel);
                    rep.max_interior_residual = std::max(rep.max_interior_residual, violation);
                    break;
                case Contact::upper: violation = std::max(0.0, rel); break;
                case Contact::lower: violation = std::max(0.0, -rel); break;
            }
            if (violation > tol) ++rep.violating_nodes;
            if (violation > rep.max_violation) {
                rep.max_violation = violation;
                rep.worst_slice = k;
                rep.worst_node = i;
            }
        }
    }
    return rep;
}

}  // namespace mertc
