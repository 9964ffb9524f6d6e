#pragma once

// Problem definition for the three double obstacle formulations: the
// log-utility problem with consumption in bid-price ("hat") coordinates, the
// CRRA problem without consumption in original coordinates, and the
// stationary infinite-horizon log problem.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

#include "mertc/error.hpp"
#include "mertc/params.hpp"

namespace mertc {

enum class Variant { log_consumption_hat, crra_no_consumption, infinite_horizon_log };

[[nodiscard]] inline std::string_view to_string(Variant v) {
    switch (v) {
        case Variant::log_consumption_hat: return "log_consumption_hat";
        case Variant::crra_no_consumption: return "crra_no_consumption";
        case Variant::infinite_horizon_log: return "infinite_horizon_log";
    }
    return "?";
}

inline constexpr double max_theta = 1e3;

/// Uniform space-time grid. `x_min` is measured in the hat frame where the
/// singularity sits at -1; CRRA grids are shifted right by mu so the margin
/// above their singularity at -1 + mu is the same.
struct GridConfig {
    double x_min = -1.0 + 1e-3;
    double x_max = 20.0;
    int n_space = 2001;
    int n_time = 800;
};

struct SolverConfig {
    double psor_relaxation = 1.5;
    double psor_tol = 1e-9;
    int psor_max_iter = 10000;
    double picard_tol = 1e-8;
    int picard_max_iter = 50;
    double steady_state_tol = 1e-10;
    int steady_state_max_steps = 20000;
};

struct ProblemSpec {
    Variant variant = Variant::log_consumption_hat;
    ModelParams params;
    GridConfig grid;
    SolverConfig solver;
};

/// Closed-form obstacle pair for one variant.
struct Obstacles {
    double upper_shift;  ///< upper(x) = 1 / (x + upper_shift)
    double lower_shift;  ///< lower(x) = 1 / (x + lower_shift)

    static Obstacles for_spec(const ProblemSpec& spec) {
        const auto& c = spec.params.costs;
        if (spec.variant == Variant::crra_no_consumption) return {1.0 - c.mu, 1.0 + c.lambda};
        return {1.0, c.theta()};
    }

    /// Left end of the domain; both obstacles blow up here or beyond.
    [[nodiscard]] double singularity() const noexcept { return -upper_shift; }

    [[nodiscard]] double upper(double x) const {
        check(x);
        return 1.0 / (x + upper_shift);
    }
    [[nodiscard]] double lower(double x) const {
        check(x);
        return 1.0 / (x + lower_shift);
    }

private:
    void check(double x) const {
        if (!(x > singularity())) {
            throw usage_error("obstacle evaluated at x = " + std::to_string(x) +
                              " at or below the singularity " + std::to_string(singularity()));
        }
    }
};

[[nodiscard]] inline double upper_obstacle(double x, const ProblemSpec& spec) {
    return Obstacles::for_spec(spec).upper(x);
}
[[nodiscard]] inline double lower_obstacle(double x, const ProblemSpec& spec) {
    return Obstacles::for_spec(spec).lower(x);
}

/// Materialized node and time coordinates of a spec.
struct Grid {
    std::vector<double> x;
    double h = 0.0;
    double dt = 0.0;
    int n_time = 0;
    double T = 0.0;

    [[nodiscard]] std::size_t size() const noexcept { return x.size(); }
    [[nodiscard]] double time(int k) const noexcept { return k == n_time ? T : k * dt; }
};

[[nodiscard]] inline double effective_x_min(const ProblemSpec& spec) {
    return spec.variant == Variant::crra_no_consumption ? spec.grid.x_min + spec.params.costs.mu
                                                        : spec.grid.x_min;
}

[[nodiscard]] inline Grid make_grid(const ProblemSpec& spec) {
    Grid g;
    const double lo = effective_x_min(spec);
    const int n = spec.grid.n_space;
    g.h = (spec.grid.x_max - lo) / (n - 1);
    g.x.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) g.x[static_cast<std::size_t>(i)] = lo + i * g.h;
    g.x.back() = spec.grid.x_max;
    g.n_time = spec.grid.n_time;
    g.T = spec.params.market.T;
    g.dt = g.T / g.n_time;
    return g;
}

[[nodiscard]] inline std::vector<Violation> validate(const ProblemSpec& spec) {
    auto out = validate(spec.params);
    const bool crra = spec.variant == Variant::crra_no_consumption;
    const bool crra_utility = spec.params.utility.kind == UtilityKind::crra_no_consumption;
    if (crra != crra_utility) {
        out.push_back({"variant", std::string(to_string(spec.variant)) +
                                      " does not match the configured utility"});
    }
    const auto& c = spec.params.costs;
    if (c.mu < 1.0 && c.theta() > max_theta) {
        out.push_back({"theta", "theta <= 1e3 required"});
    }
    const auto& g = spec.grid;
    if (!(g.x_min > -1.0 && g.x_min < 0.0)) out.push_back({"x_min", "-1 < x_min < 0 required"});
    if (!(g.x_max > 0.0)) out.push_back({"x_max", "x_max > 0 required"});
    if (crra && !(effective_x_min(spec) < 0.0)) {
        out.push_back({"x_min", "x_min + mu < 0 required for the CRRA grid"});
    }
    if (g.n_space < 3) out.push_back({"n_space", "n_space >= 3 required"});
    if (g.n_time < 1) out.push_back({"n_time", "n_time >= 1 required"});

    const auto& s = spec.solver;
    if (!(s.psor_relaxation > 0.0 && s.psor_relaxation < 2.0)) {
        out.push_back({"psor_relaxation", "relaxation in (0, 2) required"});
    }
    if (!(s.psor_tol > 0.0)) out.push_back({"psor_tol", "tolerance > 0 required"});
    if (!(s.picard_tol > 0.0)) out.push_back({"picard_tol", "tolerance > 0 required"});
    if (!(s.steady_state_tol > 0.0)) out.push_back({"steady_state_tol", "tolerance > 0 required"});
    if (s.psor_max_iter < 1 || s.picard_max_iter < 1 || s.steady_state_max_steps < 1) {
        out.push_back({"solver", "iteration limits must be positive"});
    }
    return out;
}

inline void require_valid(const ProblemSpec& spec) {
    const auto violations = validate(spec);
    if (violations.empty()) return;
    std::string msg = "invalid problem spec:";
    for (const auto& v : violations) msg += "\n  " + v.field + ": " + v.message;
    throw config_error(msg);
}

/// Canonical text form of every field that influences a solve.
[[nodiscard]] inline std::string canonical_string(const ProblemSpec& s) {
    const auto& m = s.params.market;
    const auto& c = s.params.costs;
    const auto& u = s.params.utility;
    const auto& g = s.grid;
    const auto& sc = s.solver;
    char buf[768];
    std::snprintf(buf, sizeof buf,
                  "variant=%s;alpha=%.17g;r=%.17g;sigma=%.17g;beta=%.17g;T=%.17g;"
                  "lambda=%.17g;mu=%.17g;utility=%d;gamma=%.17g;x_min=%.17g;x_max=%.17g;"
                  "n_space=%d;n_time=%d;omega=%.17g;psor_tol=%.17g;psor_max=%d;"
                  "picard_tol=%.17g;picard_max=%d;ss_tol=%.17g;ss_max=%d",
                  std::string(to_string(s.variant)).c_str(), m.alpha, m.r, m.sigma, m.beta, m.T,
                  c.lambda, c.mu, static_cast<int>(u.kind), u.gamma, g.x_min, g.x_max, g.n_space,
                  g.n_time, sc.psor_relaxation, sc.psor_tol, sc.psor_max_iter, sc.picard_tol,
                  sc.picard_max_iter, sc.steady_state_tol, sc.steady_state_max_steps);
    return buf;
}

/// 64-bit FNV-1a.
[[nodiscard]] inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char ch : bytes) {
        h ^= ch;
        h *= 0x100000001b3ull;
    }
    return h;
}

[[nodiscard]] inline std::uint64_t spec_hash(const ProblemSpec& s) { return fnv1a(canonical_string(s)); }

[[nodiscard]] inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

}  // namespace mertc
