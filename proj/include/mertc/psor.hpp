#pragma once

// Projected SOR for the tridiagonal double obstacle problem
//
//     lo <= v <= hi,   (A v - b)_i = 0 where lo_i < v_i < hi_i,
//                      (A v - b)_i <= 0 where v_i = hi_i,
//                      (A v - b)_i >= 0 where v_i = lo_i.

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "mertc/operator.hpp"

namespace mertc {

struct PsorResult {
    int iterations = 0;
    double last_update = 0.0;
    bool converged = false;
    bool relaxation_fallback = false;  ///< switched to omega = 1 after non-contraction
};

/// Iterates in place on `v` until the sup-norm of one sweep's update drops
/// below `tol`. Rows with lo == hi are effectively Dirichlet rows. With
/// omega > 1 a sweep can amplify errors along rows whose off-diagonal weight
/// is close to the diagonal (strong drift), so once the update grows for
/// three sweeps in a row, or stops improving for twenty, the iteration
/// restarts from the initial `v` as projected Gauss-Seidel, which converges
/// for every M-matrix.
inline PsorResult psor(const Tridiagonal& a, std::span<const double> rhs, std::span<const double> lo,
                       std::span<const double> hi, std::span<double> v, double omega, double tol,
                       int max_iter) {
    const std::size_t n = v.size();
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
    std::vector<double> start;
    if (omega != 1.0) start.assign(v.begin(), v.end());

    PsorResult res;
    double best = std::numeric_limits<double>::infinity();
    double previous = best;
    int stalled = 0;
    int growing = 0;
    for (int it = 1; it <= max_iter; ++it) {
        double max_update = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double off = 0.0;
            if (i > 0) off += a.sub[i] * v[i - 1];
            if (i + 1 < n) off += a.super[i] * v[i + 1];
            const double gs = (rhs[i] - off) / a.diag[i];
            const double next = std::clamp(v[i] + omega * (gs - v[i]), lo[i], hi[i]);
            max_update = std::max(max_update, std::abs(next - v[i]));
            v[i] = next;
        }
        res.iterations = it;
        res.last_update = max_update;
        if (max_update < tol) {
            res.converged = true;
            break;
        }
        growing = max_update > previous ? growing + 1 : 0;
        previous = max_update;
        if (max_update < best) {
            best = max_update;
            stalled = 0;
        } else {
            ++stalled;
        }
        if (omega != 1.0 && (growing >= 3 || stalled >= 20)) {
            omega = 1.0;
            res.relaxation_fallback = true;
            std::copy(start.begin(), start.end(), v.begin());
            best = previous = std::numeric_limits<double>::infinity();
            stalled = growing = 0;
        }
    }
    return res;
}

/// Seeds `v` for PSOR by a primal-dual active-set iteration. The first
/// pinned set holds the nodes that `v` keeps at an obstacle with a residual
/// of the matching sign. Each round solves the linear system on the free
/// nodes; pinned nodes whose residual has the wrong sign are released and
/// free nodes that overshoot an obstacle are pinned to it. A round that
/// changes nothing leaves the exact complementarity solution in `v`.
/// Released nodes leave the pinned set one per round at each edge, so after
/// a large step the set may need many rounds; `max_rounds` <= 0 allows one
/// per node.
inline void pinned_start(const Tridiagonal& a, std::span<const double> rhs, std::span<const double> lo,
                         std::span<const double> hi, std::span<double> v, int max_rounds = 0) {
    const std::size_t n = v.size();
    const int rounds = max_rounds > 0 ? max_rounds : static_cast<int>(n);
    std::vector<signed char> state(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double residual = a.apply_row(v, i) - rhs[i];
        state[i] = v[i] >= hi[i] && residual <= 0.0 ? 1 : v[i] <= lo[i] && residual >= 0.0 ? -1 : 0;
    }
    Tridiagonal pinned = a;
    std::vector<double> b(n);
    for (int round = 0; round < rounds; ++round) {
        pinned = a;
        b.assign(rhs.begin(), rhs.end());
        for (std::size_t i = 0; i < n; ++i) {
            if (state[i] == 0) continue;
            pinned.sub[i] = 0.0;
            pinned.super[i] = 0.0;
            pinned.diag[i] = 1.0;
            b[i] = state[i] > 0 ? hi[i] : lo[i];
        }
        thomas_solve(pinned, b, v);
        bool changed = false;
        for (std::size_t i = 0; i < n; ++i) {
            signed char next = state[i];
            if (state[i] == 0) {
                next = v[i] > hi[i] ? 1 : v[i] < lo[i] ? -1 : 0;
            } else {
                const double residual = a.apply_row(v, i) - rhs[i];
                if ((state[i] > 0 && residual > 0.0) || (state[i] < 0 && residual < 0.0)) next = 0;
            }
            changed = changed || next != state[i];
            state[i] = next;
        }
        if (!changed) break;
    }
    for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
}

}  // namespace mertc
