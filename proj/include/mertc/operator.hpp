#pragma once

// Frozen-coefficient finite-difference discretization of the spatial part of
// the obstacle operators. For every variant the operator has the form
//
//     -diffusion * v_xx + drift * v_x + reaction * v
//
// where drift and reaction may depend on a frozen copy of v (Picard
// linearization). The first-order term is central; where the cell Peclet
// number exceeds one the diffusion is raised to the smallest value that keeps
// the row an M-matrix row, |drift| h / 2. This is plain central differencing
// wherever that is monotone and upwinding at the degenerate point x = 0.

#include <algorithm>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "mertc/error.hpp"
#include "mertc/problem.hpp"

namespace mertc {

struct NodeCoefficients {
    double diffusion = 0.0;
    double drift = 0.0;
    double reaction = 0.0;
};

/// Per-node coefficients. `time_weight` is 1/g(t) for the finite-horizon log
/// problem and beta for the stationary one; it is unused for CRRA.
[[nodiscard]] inline NodeCoefficients node_coefficients(const ProblemSpec& spec, double x,
                                                        double frozen_v, double time_weight) {
    const auto& m = spec.params.market;
    const double s2 = m.sigma * m.sigma;
    const double premium = m.excess_return();
    NodeCoefficients c;
    c.diffusion = 0.5 * s2 * x * x;
    if (spec.variant == Variant::crra_no_consumption) {
        const double gamma = spec.params.utility.gamma;
        // -L1 v with L1 carrying  gamma sigma^2 (x^2 v v_x + x v^2)
        c.drift = (premium - (2.0 - gamma) * s2) * x - gamma * s2 * x * x * frozen_v;
        c.reaction = (premium - (1.0 - gamma) * s2) - gamma * s2 * x * frozen_v;
    } else {
        // -L1 v + w (v + v_x / v)
        c.drift = (premium - 2.0 * s2) * x + time_weight / frozen_v;
        c.reaction = (premium - s2) + time_weight;
    }
    return c;
}

/// Tridiagonal rows; row i reads  sub[i] v[i-1] + diag[i] v[i] + super[i] v[i+1].
struct Tridiagonal {
    std::vector<double> sub;
    std::vector<double> diag;
    std::vector<double> super;

    explicit Tridiagonal(std::size_t n = 0) : sub(n, 0.0), diag(n, 0.0), super(n, 0.0) {}

    [[nodiscard]] std::size_t size() const noexcept { return diag.size(); }

    [[nodiscard]] double apply_row(std::span<const double> v, std::size_t i) const {
        double out = diag[i] * v[i];
        if (i > 0) out += sub[i] * v[i - 1];
        if (i + 1 < v.size()) out += super[i] * v[i + 1];
        return out;
    }
};

/// Diffusion used in the stencil: at least |drift| h / 2, so the centrally
/// differenced first-order term keeps off-diagonals nonpositive.
[[nodiscard]] inline double fitted_diffusion(double diffusion, double drift, double h) {
    return std::max(diffusion, 0.5 * std::abs(drift) * h);
}

/// Time weight entering the consumption term at time t.
[[nodiscard]] inline double time_weight(const ProblemSpec& spec, double t) {
    switch (spec.variant) {
        case Variant::log_consumption_hat: return 1.0 / discount_factor(spec.params.market, t);
        case Variant::infinite_horizon_log: return spec.params.market.beta;
        case Variant::crra_no_consumption: return 0.0;
    }
    return 0.0;
}

/// Spatial operator on interior nodes; boundary rows are left zero and are
/// closed by the caller.
[[nodiscard]] inline Tridiagonal assemble_operator(const ProblemSpec& spec, std::span<const double> x,
                                                   std::span<const double> frozen, double t) {
    const std::size_t n = x.size();
    if (frozen.size() != n) throw usage_error("assemble_operator: frozen slice has wrong size");
    const double h = (x[n - 1] - x[0]) / static_cast<double>(n - 1);
    const double inv_h = 1.0 / h;
    const double inv_h2 = inv_h * inv_h;
    const double w = time_weight(spec, t);

    Tridiagonal op(n);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        if (!(frozen[i] > 0.0)) {
            throw solver_error("non-positive frozen value " + std::to_string(frozen[i]) +
                               " at x = " + std::to_string(x[i]));
        }
        const auto c = node_coefficients(spec, x[i], frozen[i], w);
        const double diff = fitted_diffusion(c.diffusion, c.drift, h) * inv_h2;
        const double half = 0.5 * c.drift * inv_h;
        op.sub[i] = -diff - half;
        op.super[i] = -diff + half;
        op.diag[i] = 2.0 * diff + c.reaction;
    }
    return op;
}

/// Solves a tridiagonal system in place (Thomas algorithm). Requires a
/// diagonally dominant matrix, which the M-matrix rows guarantee.
inline void thomas_solve(const Tridiagonal& a, std::span<const double> rhs, std::span<double> out) {
    const std::size_t n = a.size();
    std::vector<double> c(n), d(n);
    double denom = a.diag[0];
    c[0] = a.super[0] / denom;
    d[0] = rhs[0] / denom;
    for (std::size_t i = 1; i < n; ++i) {
        denom = a.diag[i] - a.sub[i] * c[i - 1];
        c[i] = a.super[i] / denom;
        d[i] = (rhs[i] - a.sub[i] * d[i - 1]) / denom;
    }
    out[n - 1] = d[n - 1];
    for (std::size_t i = n - 1; i-- > 0;) out[i] = d[i] - c[i] * out[i + 1];
}

}  // namespace mertc
