#pragma once

// Model parameters for the finite-horizon Merton problem with proportional
// transaction costs, plus the closed-form quantities derived from them.

#include <cmath>
#include <string>
#include <vector>

#include "mertc/error.hpp"

namespace mertc {

/// Market coefficients, all annual rates.
struct MarketParams {
    double alpha = 0.3;   ///< expected stock return
    double r = 0.01;      ///< risk-free rate
    double sigma = 0.2;   ///< stock volatility
    double beta = 0.1;    ///< subjective discount rate
    double T = 2.0;       ///< horizon in years

    [[nodiscard]] double excess_return() const noexcept { return alpha - r; }
};

/// Proportional cost rates: lambda is paid on purchases, mu on sales.
struct CostParams {
    double lambda = 0.1;
    double mu = 0.1;

    /// Merged cost parameter (1 + lambda) / (1 - mu).
    [[nodiscard]] double theta() const noexcept { return (1.0 + lambda) / (1.0 - mu); }

    /// Costs whose merged parameter equals `theta` with the whole cost on the buy side.
    static CostParams from_theta(double theta) { return {theta - 1.0, 0.0}; }
};

enum class UtilityKind { log_with_consumption, crra_no_consumption };

struct UtilitySpec {
    UtilityKind kind = UtilityKind::log_with_consumption;
    double gamma = -1.0;  ///< CRRA exponent; ignored for log utility

    static UtilitySpec log() { return {UtilityKind::log_with_consumption, 0.0}; }
    static UtilitySpec crra(double gamma) { return {UtilityKind::crra_no_consumption, gamma}; }
};

struct ModelParams {
    MarketParams market;
    CostParams costs;
    UtilitySpec utility;
};

struct Violation {
    std::string field;
    std::string message;
};

/// Frictionless optimal bond-to-stock ratio for log utility.
[[nodiscard]] inline double merton_line(const MarketParams& m) {
    const double premium = m.excess_return();
    return -(premium - m.sigma * m.sigma) / premium;
}

/// Bond-to-stock ratio of the frictionless CRRA investor, (1 - pi) / pi with
/// pi = (alpha - r) / ((1 - gamma) sigma^2). Reduces to merton_line at gamma = 0.
[[nodiscard]] inline double crra_merton_line(const MarketParams& m, double gamma) {
    const double pi = m.excess_return() / ((1.0 - gamma) * m.sigma * m.sigma);
    return (1.0 - pi) / pi;
}

[[nodiscard]] inline double theta(const CostParams& c) {
    if (!(c.lambda + c.mu > 0.0)) {
        throw config_error("lambda + mu > 0 required");
    }
    return c.theta();
}

/// Time weight g(t) = (1 - e^{-beta (T - t)}) / beta + e^{-beta (T - t)} of the
/// log-utility value function; g(T) = 1.
[[nodiscard]] inline double discount_factor(const MarketParams& m, double t) {
    if (!(t >= 0.0 && t <= m.T)) {
        throw usage_error("discount_factor: t = " + std::to_string(t) + " outside [0, T]");
    }
    const double s = m.T - t;
    const double x = m.beta * s;
    // (1 - e^{-x}) / beta, with the beta -> 0 limit s
    const double annuity = (std::abs(x) < 1e-8) ? s * (1.0 - 0.5 * x) : -std::expm1(-x) / m.beta;
    return annuity + std::exp(-x);
}

[[nodiscard]] inline std::vector<Violation> validate(const ModelParams& p) {
    std::vector<Violation> out;
    const auto& m = p.market;
    const auto finite = [](double v) { return std::isfinite(v); };
    if (!finite(m.alpha) || !finite(m.r) || !finite(m.sigma) || !finite(m.beta) || !finite(m.T)) {
        out.push_back({"market", "all market parameters must be finite"});
    }
    if (!(m.alpha > m.r)) out.push_back({"alpha", "alpha > r required"});
    if (!(m.sigma > 0.0)) out.push_back({"sigma", "sigma > 0 required"});
    if (!(m.beta > 0.0)) out.push_back({"beta", "beta > 0 required"});
    if (!(m.T > 0.0)) out.push_back({"T", "T > 0 required"});

    const auto& c = p.costs;
    if (!(c.lambda >= 0.0) || !finite(c.lambda)) out.push_back({"lambda", "lambda in [0, inf) required"});
    if (!(c.mu >= 0.0 && c.mu < 1.0)) out.push_back({"mu", "mu in [0, 1) required"});
    if (!(c.lambda + c.mu > 0.0)) out.push_back({"lambda", "lambda + mu > 0 required"});

    if (p.utility.kind == UtilityKind::crra_no_consumption) {
        if (!(p.utility.gamma < 1.0)) out.push_back({"gamma", "gamma < 1 required"});
        if (p.utility.gamma == 0.0) out.push_back({"gamma", "gamma != 0 required"});
    }
    return out;
}

/// Throws a config error listing every violation.
inline void require_valid(const ModelParams& p) {
    const auto violations = validate(p);
    if (violations.empty()) return;
    std::string msg = "invalid parameters:";
    for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
    throw config_error(msg);
}

}  // namespace mertc
