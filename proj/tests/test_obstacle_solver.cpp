#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "mertc/boundary.hpp"
#include "mertc/invariants.hpp"
#include "mertc/psor.hpp"
#include "mertc/solver.hpp"

using namespace mertc;
using Catch::Approx;

namespace {

ProblemSpec coarse(Variant v = Variant::log_consumption_hat, CostParams costs = {0.1, 0.1}) {
    ProblemSpec s;
    s.variant = v;
    s.params.costs = costs;
    s.params.utility = v == Variant::crra_no_consumption ? UtilitySpec::crra(-1.0) : UtilitySpec::log();
    if (v == Variant::crra_no_consumption) s.params.market.alpha = 0.07;
    s.grid.n_space = 401;
    s.grid.n_time = 160;
    return s;
}

}  // namespace

TEST_CASE("obstacle formulas") {
    auto s = coarse(Variant::log_consumption_hat, CostParams::from_theta(2.0));
    CHECK(upper_obstacle(0.0, s) == Approx(1.0));
    CHECK(lower_obstacle(0.0, s) == Approx(0.5));
    auto c = coarse(Variant::crra_no_consumption, {0.1, 0.1});
    CHECK(upper_obstacle(0.0, c) == Approx(1.0 / 0.9));
    CHECK(lower_obstacle(0.0, c) == Approx(1.0 / 1.1));
    for (double x : {-0.5, 0.0, 0.3, 7.0}) {
        for (double th : {1.01, 1.5, 4.0}) {
            auto t = coarse(Variant::log_consumption_hat, CostParams::from_theta(th));
            REQUIRE(upper_obstacle(x, t) > lower_obstacle(x, t));
        }
    }
}

TEST_CASE("spec validation") {
    auto s = coarse();
    CHECK(validate(s).empty());
    s.grid.x_min = -1.0;
    s.grid.n_space = 2;
    s.grid.n_time = 0;
    CHECK(validate(s).size() == 3);
    auto m = coarse();
    m.params.utility = UtilitySpec::crra(-1.0);
    CHECK_FALSE(validate(m).empty());
    auto big = coarse(Variant::log_consumption_hat, {2000.0, 0.0});
    CHECK_FALSE(validate(big).empty());
    CHECK_THROWS_AS(solve(big), Error);
}

TEST_CASE("operator on a constant slice") {
    const auto s = coarse();
    const auto g = make_grid(s);
    const double c = 0.8;
    const std::vector<double> v(g.size(), c);
    const double t = 0.5;
    const auto op = assemble_operator(s, g.x, v, t);
    const auto& m = s.params.market;
    const double w = 1.0 / discount_factor(m, t);
    const double expected = (m.alpha - m.r - m.sigma * m.sigma) * c + w * c;
    for (std::size_t i = 1; i + 1 < g.size(); i += 37) {
        REQUIRE(op.apply_row(v, i) == Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("coefficients at x = 0 keep only zeroth-order terms") {
    const auto s = coarse();
    const auto& m = s.params.market;
    const auto k = node_coefficients(s, 0.0, 0.9, 0.7);
    CHECK(k.diffusion == 0.0);
    CHECK(k.drift == Approx(0.7 / 0.9));  // consumption term only
    CHECK(k.reaction == Approx(m.alpha - m.r - m.sigma * m.sigma + 0.7));
    const auto c = coarse(Variant::crra_no_consumption);
    const auto kc = node_coefficients(c, 0.0, 0.9, 0.0);
    CHECK(kc.diffusion == 0.0);
    CHECK(kc.drift == 0.0);
    const auto& mc = c.params.market;
    CHECK(kc.reaction == Approx(mc.alpha - mc.r - (1.0 - c.params.utility.gamma) * mc.sigma * mc.sigma));
}

TEST_CASE("assembled rows are M-matrix rows") {
    for (auto v : {Variant::log_consumption_hat, Variant::crra_no_consumption}) {
        const auto s = coarse(v);
        const auto g = make_grid(s);
        const auto obs = Obstacles::for_spec(s);
        std::vector<double> mid(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) mid[i] = 0.5 * (obs.upper(g.x[i]) + obs.lower(g.x[i]));
        const auto op = assemble_operator(s, g.x, mid, 0.3);
        for (std::size_t i = 1; i + 1 < g.size(); ++i) {
            REQUIRE(op.sub[i] <= 0.0);
            REQUIRE(op.super[i] <= 0.0);
        }
    }
}

TEST_CASE("projected SOR reaches the complementarity solution") {
    // -v'' = -1 on [0, 1] with v <= 0.05: the upper obstacle is active in the middle
    const std::size_t n = 101;
    Tridiagonal a(n);
    std::vector<double> rhs(n, -1.0), lo(n, -1.0), hi(n, 0.05), v(n, 0.0);
    const double h = 1.0 / (n - 1);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        a.sub[i] = a.super[i] = -1.0 / (h * h);
        a.diag[i] = 2.0 / (h * h);
        rhs[i] = 10.0;
    }
    a.diag[0] = a.diag[n - 1] = 1.0;
    rhs[0] = rhs[n - 1] = 0.0;
    const auto r = psor(a, rhs, lo, hi, v, 1.8, 1e-12, 100000);
    REQUIRE(r.converged);
    for (std::size_t i = 1; i + 1 < n; ++i) {
        const double res = a.apply_row(v, i) - rhs[i];
        if (v[i] < hi[i] - 1e-12) REQUIRE(std::abs(res) < 1e-6);
        else REQUIRE(res <= 1e-6);
    }
    std::vector<double> w(n, 0.0);
    pinned_start(a, rhs, lo, hi, w);
    for (std::size_t i = 0; i < n; ++i) REQUIRE(w[i] == Approx(v[i]).margin(1e-8));
}

TEST_CASE("solved fields: terminal slice, sandwich, complementarity") {
    for (auto v : {Variant::log_consumption_hat, Variant::crra_no_consumption}) {
        const auto f = solve(coarse(v));
        const int kt = f.terminal_index();
        for (std::size_t i = 0; i < f.nodes(); ++i) {
            REQUIRE(f.at(i, kt) == f.upper[i]);
            REQUIRE(f.contact_slice(kt)[i] == Contact::upper);
        }
        for (int k = 0; k < f.slices(); ++k) {
            for (std::size_t i = 0; i < f.nodes(); ++i) {
                REQUIRE(f.at(i, k) >= f.lower[i]);
                REQUIRE(f.at(i, k) <= f.upper[i]);
            }
        }
        const auto res = complementarity_residual(f);
        CHECK(res.max_violation <= 1e-6);
        const auto inv = run_invariant_suite(f);
        for (const auto& c : inv.checks) {
            INFO(std::string(to_string(v)) << " " << c.name << " worst " << c.worst << " tol " << c.tolerance);
            CHECK(c.passed);
        }
        const auto* time = inv.find("nondecreasing-in-t");
        REQUIRE(time != nullptr);
        CHECK(time->applicable == (v == Variant::crra_no_consumption));
    }
}

TEST_CASE("complementarity residual flags a field pinned to the upper obstacle") {
    auto f = solve(coarse());
    for (int k = 0; k < f.terminal_index(); ++k) {
        auto s = f.slice(k);
        std::copy(f.upper.begin(), f.upper.end(), s.begin());
        classify_contact(f.slice(k), f.lower, f.upper, f.contact_slice(k));
    }
    const auto res = complementarity_residual(f);
    CHECK(res.max_violation > 1e-3);
    CHECK(res.violating_nodes > 0);
}

TEST_CASE("stationary solve settles between the obstacles") {
    auto s = coarse(Variant::infinite_horizon_log, CostParams::from_theta(2.0));
    s.params.market.beta = 0.5;
    const auto f = solve(s);
    CHECK(f.stationary);
    CHECK(f.slices() == 1);
    CHECK(f.stats.final_change < s.solver.steady_state_tol);
    const auto b = extract_slice(f, 0);
    CHECK(b.sell < 0.0);
    CHECK(b.buy > 0.0);
    CHECK(run_invariant_suite(f).passed());
}

TEST_CASE("reference market, theta = 11/9, t = 0.25: sell_hat <= x_M <= buy_hat / theta") {
    ProblemSpec s;
    s.params.costs = {0.1, 0.1};
    const auto f = solve(s);
    const auto c = extract_boundaries(f);
    const auto k = nearest_index(c, 0.25);
    const double xm = merton_line(s.params.market);
    const double tol = 2.0 * c.h;
    CHECK(c.sell_hat[k] <= xm + tol);
    CHECK(c.buy_hat[k] / s.params.costs.theta() >= xm - tol);
}

TEST_CASE("solves are deterministic") {
    const auto a = solve(coarse());
    const auto b = solve(coarse());
    CHECK(a.values == b.values);
}
