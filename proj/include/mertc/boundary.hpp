#pragma once

// Free-boundary extraction from solved fields and the coordinate maps between
// bid-price ("hat"), original and cost-adjusted boundaries.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "mertc/error.hpp"
#include "mertc/solver.hpp"

namespace mertc {

/// Buy boundary sentinel: no buy region in the slice.
inline constexpr double no_buy_boundary = std::numeric_limits<double>::infinity();

struct BoundaryCurves {
    std::vector<double> times;
    std::vector<double> sell_hat;
    std::vector<double> buy_hat;
    std::vector<double> sell_orig;
    std::vector<double> buy_orig;
    std::vector<double> sell_adjusted;  ///< x_s / (1 - mu)
    std::vector<double> buy_adjusted;   ///< x_b / (1 + lambda)
    /// Buy boundary fell inside the right truncation margin and was replaced
    /// by the sentinel.
    std::vector<char> buy_truncated;
    double h = 0.0;  ///< spacing of the grid the curves were read from

    [[nodiscard]] std::size_t size() const noexcept { return times.size(); }

    void resize(std::size_t n) {
        times.resize(n);
        for (auto* v : {&sell_hat, &buy_hat, &sell_orig, &buy_orig, &sell_adjusted, &buy_adjusted}) {
            v->assign(n, 0.0);
        }
        buy_truncated.assign(n, 0);
    }
};

/// Boundary of one slice in the field's own coordinate.
struct SliceBoundary {
    double sell = 0.0;
    double buy = no_buy_boundary;
    bool buy_truncated = false;
};

namespace detail {

/// Linear extrapolation of sqrt(gap) from two nodes to its zero. The gap
/// between v and an obstacle grows quadratically off a smooth-fit free
/// boundary, so its square root is locally linear.
inline double sqrt_gap_root(double x1, double gap1, double gap2, double step) {
    const double s1 = std::sqrt(std::max(gap1, 0.0));
    const double s2 = std::sqrt(std::max(gap2, 0.0));
    if (!(s2 > s1)) return std::numeric_limits<double>::quiet_NaN();
    return x1 - s1 * step / (s2 - s1);
}

/// Fits gap(x) = c |x - root|^p through three consecutive nodes x1, x1 + step,
/// x1 + 2 step and returns the root. The exponent is free, so the fit covers
/// both the quadratic contact of a smooth-fit boundary and the linear contact
/// seen in the layer next to expiry. Returns NaN when the gaps are not
/// strictly increasing; returns x1 - step when the data call for a root
/// farther out than one cell.
inline double power_gap_root(double x1, double gap1, double gap2, double gap3, double step) {
    if (!(gap1 > 0.0 && gap2 > gap1 && gap3 > gap2)) return std::numeric_limits<double>::quiet_NaN();
    const double observed = std::log(gap2 / gap1) / std::log(gap3 / gap2);
    // ratio(d) = log((d+1)/d) / log((d+2)/(d+1)) for a root d cells away;
    // independent of p and decreasing in d
    const auto ratio = [](double d) { return std::log1p(1.0 / d) / std::log1p(1.0 / (d + 1.0)); };
    if (observed <= ratio(1.0)) return x1 - step;
    double lo = 1e-12;
    double hi = 1.0;
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (ratio(mid) > observed ? lo : hi) = mid;
    }
    return x1 - 0.5 * (lo + hi) * step;
}

/// Sub-cell root from the gaps at the first three nodes off the contact set,
/// preferring the power fit.
inline double gap_root(double x1, double gap1, double gap2, double gap3, double step) {
    const double root = power_gap_root(x1, gap1, gap2, gap3, step);
    return std::isfinite(root) ? root : sqrt_gap_root(x1, gap1, gap2, step);
}

}  // namespace detail

/// Reads both free boundaries of slice k in the field's native coordinate.
[[nodiscard]] inline SliceBoundary extract_slice(const SolutionField& f, int k) {
    if (!f.stationary && k >= f.terminal_index()) {
        throw usage_error("boundaries are undefined on the terminal slice");
    }
    if (k < 0 || k >= f.slices()) throw usage_error("slice index out of range");
    const auto c = f.contact_slice(k);
    const auto v = f.slice(k);
    const auto& x = f.grid.x;
    const std::size_t n = f.nodes();
    const double h = f.grid.h;

    std::size_t last_upper = 0;
    while (last_upper + 1 < n && c[last_upper + 1] == Contact::upper) ++last_upper;
    std::size_t first_lower = n - 1;
    while (first_lower > last_upper + 1 && c[first_lower - 1] == Contact::lower) --first_lower;

    // one stray flag next to each boundary is tolerated
    for (std::size_t i = last_upper + 3; i < n; ++i) {
        if (c[i] == Contact::upper) {
            throw solver_error("sell contact set is not an interval at t = " + std::to_string(f.time(k)) +
                               " (stray node at x = " + std::to_string(x[i]) + ")");
        }
    }
    for (std::size_t i = 0; i + 2 < first_lower; ++i) {
        if (c[i] == Contact::lower) {
            throw solver_error("buy contact set is not an interval at t = " + std::to_string(f.time(k)) +
                               " (stray node at x = " + std::to_string(x[i]) + ")");
        }
    }

    SliceBoundary out;
    out.sell = x[last_upper];
    if (last_upper + 3 < first_lower) {
        const std::size_t i1 = last_upper + 1;
        const double root = detail::gap_root(x[i1], f.upper[i1] - v[i1], f.upper[i1 + 1] - v[i1 + 1],
                                             f.upper[i1 + 2] - v[i1 + 2], h);
        if (std::isfinite(root)) out.sell = std::clamp(root, x[last_upper], x[i1]);
    }

    if (first_lower == n - 1) return out;  // only the closure node
    if (x[first_lower] >= x.back() - detail::right_margin_width(f.grid)) {
        out.buy_truncated = true;
        return out;
    }
    out.buy = x[first_lower];
    if (first_lower >= last_upper + 4) {
        const std::size_t j1 = first_lower - 1;
        const double root = detail::gap_root(x[j1], v[j1] - f.lower[j1], v[j1 - 1] - f.lower[j1 - 1],
                                             v[j1 - 2] - f.lower[j1 - 2], -h);
        if (std::isfinite(root)) out.buy = std::clamp(root, x[j1], x[first_lower]);
    }
    return out;
}

/// Fills the original and cost-adjusted curves from the hat curves.
[[nodiscard]] inline BoundaryCurves to_original(BoundaryCurves curves, const CostParams& costs) {
    const double keep = 1.0 - costs.mu;
    const double th = costs.theta();
    for (std::size_t k = 0; k < curves.size(); ++k) {
        curves.sell_orig[k] = keep * curves.sell_hat[k];
        curves.buy_orig[k] = keep * curves.buy_hat[k];
        curves.sell_adjusted[k] = curves.sell_hat[k];
        curves.buy_adjusted[k] = curves.buy_hat[k] / th;
    }
    return curves;
}

namespace detail {

inline BoundaryCurves read_native(const SolutionField& f) {
    BoundaryCurves out;
    const int count = f.stationary ? 1 : f.terminal_index();
    out.resize(static_cast<std::size_t>(count));
    out.h = f.grid.h;
    for (int k = 0; k < count; ++k) {
        const auto b = extract_slice(f, k);
        const auto i = static_cast<std::size_t>(k);
        out.times[i] = f.time(k);
        out.sell_hat[i] = b.sell;
        out.buy_hat[i] = b.buy;
        out.buy_truncated[i] = b.buy_truncated ? 1 : 0;
    }
    return out;
}

}  // namespace detail

/// Boundaries of a hat-coordinate field (finite-horizon or stationary log
/// problem), converted to original and cost-adjusted coordinates.
[[nodiscard]] inline BoundaryCurves extract_boundaries(const SolutionField& f) {
    if (f.spec.variant == Variant::crra_no_consumption) {
        throw usage_error("CRRA fields live in original coordinates; use crra_boundaries");
    }
    return to_original(detail::read_native(f), f.spec.params.costs);
}

/// Boundaries of a CRRA field, read directly in original coordinates.
[[nodiscard]] inline BoundaryCurves crra_boundaries(const SolutionField& f) {
    if (f.spec.variant != Variant::crra_no_consumption) {
        throw usage_error("crra_boundaries requires a crra_no_consumption field");
    }
    auto curves = detail::read_native(f);
    const auto& c = f.spec.params.costs;
    for (std::size_t k = 0; k < curves.size(); ++k) {
        curves.sell_orig[k] = curves.sell_hat[k];
        curves.buy_orig[k] = curves.buy_hat[k];
        curves.sell_hat[k] = curves.sell_orig[k] / (1.0 - c.mu);
        curves.buy_hat[k] = curves.buy_orig[k] / (1.0 - c.mu);
        curves.sell_adjusted[k] = curves.sell_orig[k] / (1.0 - c.mu);
        curves.buy_adjusted[k] = curves.buy_orig[k] / (1.0 + c.lambda);
    }
    return curves;
}

/// Dispatches on the field's variant.
[[nodiscard]] inline BoundaryCurves boundaries(const SolutionField& f) {
    return f.spec.variant == Variant::crra_no_consumption ? crra_boundaries(f) : extract_boundaries(f);
}

/// Index of the slice closest to time t.
[[nodiscard]] inline std::size_t nearest_index(const BoundaryCurves& c, double t) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < c.size(); ++k) {
        if (std::abs(c.times[k] - t) < std::abs(c.times[best] - t)) best = k;
    }
    return best;
}

inline std::string format_value(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

inline const char* boundary_csv_header = "t,sell_hat,buy_hat,sell_orig,buy_orig,sell_adjusted,buy_adjusted";

inline void write_csv(std::ostream& os, const BoundaryCurves& c) {
    os << boundary_csv_header << '\n';
    for (std::size_t k = 0; k < c.size(); ++k) {
        os << format_value(c.times[k]) << ',' << format_value(c.sell_hat[k]) << ','
           << format_value(c.buy_hat[k]) << ',' << format_value(c.sell_orig[k]) << ','
           << format_value(c.buy_orig[k]) << ',' << format_value(c.sell_adjusted[k]) << ','
           << format_value(c.buy_adjusted[k]) << '\n';
    }
}

}  // namespace mertc
