#pragma once

// Property checks on solved fields. Derivative-based checks skip the nodes
// next to the truncation ends, where the Dirichlet closure rather than the
// PDE sets the profile.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mertc/solver.hpp"

namespace mertc {

struct InvariantTolerances {
    double slope = 1e-6;         ///< v_x <= -v^2 + slope * v^2 (relative)
    double scaling = 1e-6;       ///< x v_x + v >= -scaling
    double time = 1e-9;          ///< v(t + dt) - v(t) >= -time
    double monotone = 0.0;       ///< v(x + h) <= v(x) + monotone
    double complementarity = 1e-6;
};

struct InvariantCheck {
    std::string name;
    bool applicable = true;
    std::string note;  ///< reason when not applicable
    double worst = 0.0;  ///< worst violation (<= 0 means satisfied with margin)
    double tolerance = 0.0;
    bool passed = true;
    int worst_slice = -1;
    double worst_x = 0.0;
};

struct InvariantReport {
    std::vector<InvariantCheck> checks;

    [[nodiscard]] bool passed() const {
        return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
    }
    [[nodiscard]] const InvariantCheck* find(const std::string& name) const {
        for (const auto& c : checks) {
            if (c.name == name) return &c;
        }
        return nullptr;
    }
};

namespace detail {

/// First and one-past-last node unaffected by the truncation closure. The
/// Dirichlet layer at x_max spreads further than the boundary-extraction
/// margin near expiry, so derivative checks stop at twice that margin.
inline std::pair<std::size_t, std::size_t> checked_nodes(const SolutionField& f) {
    const std::size_t n = f.nodes();
    const double cut = f.grid.x.back() - 2.0 * right_margin_width(f.grid);
    std::size_t end = n - 1;
    while (end > 0 && f.grid.x[end - 1] >= cut) --end;
    return {std::min(left_margin_nodes, end), end};
}

inline void record(InvariantCheck& c, double violation, int k, double x) {
    if (violation > c.worst || c.worst_slice < 0) {
        c.worst = violation;
        c.worst_slice = k;
        c.worst_x = x;
    }
}

}  // namespace detail

/// Runs every invariant that applies to the field's variant.
[[nodiscard]] inline InvariantReport run_invariant_suite(const SolutionField& f,
                                                         const InvariantTolerances& tol = {}) {
    const auto& x = f.grid.x;
    const double h = f.grid.h;
    const std::size_t n = f.nodes();
    const int slices = f.slices();
    const auto [first, end] = detail::checked_nodes(f);
    const bool crra = f.spec.variant == Variant::crra_no_consumption;
    const bool consumption = f.spec.variant == Variant::log_consumption_hat;

    InvariantCheck sandwich{"obstacle-sandwich"};
    InvariantCheck monotone{"decreasing-in-x"};
    InvariantCheck slope{"slope-bound"};
    InvariantCheck scaling{"scaling-positive"};
    InvariantCheck time{"nondecreasing-in-t"};
    InvariantCheck residual{"complementarity"};
    sandwich.tolerance = 0.0;
    monotone.tolerance = tol.monotone;
    slope.tolerance = tol.slope;
    scaling.tolerance = tol.scaling;
    time.tolerance = tol.time;
    residual.tolerance = tol.complementarity;

    for (int k = 0; k < slices; ++k) {
        const auto v = f.slice(k);
        for (std::size_t i = 0; i < n; ++i) {
            detail::record(sandwich, std::max(f.lower[i] - v[i], v[i] - f.upper[i]), k, x[i]);
        }
        for (std::size_t i = 0; i + 1 < n; ++i) detail::record(monotone, v[i + 1] - v[i], k, x[i]);
        for (std::size_t i = std::max<std::size_t>(first, 1); i < end && i + 1 < n; ++i) {
            const double vx = (v[i + 1] - v[i - 1]) / (2.0 * h);
            const double sq = v[i] * v[i];
            detail::record(slope, (vx + sq) / sq, k, x[i]);
            if (crra) detail::record(scaling, -(x[i] * vx + v[i]), k, x[i]);
        }
        if (!consumption && !f.stationary && k + 1 < slices) {
            const auto later = f.slice(k + 1);
            for (std::size_t i = first; i < end; ++i) detail::record(time, v[i] - later[i], k, x[i]);
        }
    }

    const auto res = complementarity_residual(f, tol.complementarity);
    residual.worst = res.max_violation;
    residual.worst_slice = res.worst_slice;
    residual.worst_x = res.worst_slice >= 0 ? x[res.worst_node] : 0.0;

    for (auto* c : {&sandwich, &monotone, &slope, &scaling, &time, &residual}) {
        c->passed = c->worst <= c->tolerance;
    }
    if (!crra) {
        scaling.applicable = false;
        scaling.passed = true;
        scaling.note = "stated for the CRRA problem only";
    }
    if (consumption) {
        time.applicable = false;
        time.passed = true;
        time.note = "not applicable with consumption";
    } else if (f.stationary) {
        time.applicable = false;
        time.passed = true;
        time.note = "stationary field";
    }

    InvariantReport out;
    out.checks = {sandwich, monotone, slope, scaling, time, residual};
    return out;
}

}  // namespace mertc
