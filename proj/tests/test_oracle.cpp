#include <catch_amalgamated.hpp>

#include <cmath>

#include "mertc/boundary.hpp"
#include "mertc/oracle.hpp"

using namespace mertc;

namespace {

ProblemSpec coarse_instance(int nodes = 201, int steps = 100) {
    ProblemSpec s;
    s.params.market.T = 0.5;
    s.params.costs = CostParams::from_theta(1.2);
    s.grid.n_space = nodes;
    s.grid.n_time = steps;
    return s;
}

double sup_gap(const SolutionField& a, const SolutionField& b) {
    REQUIRE(a.values.size() == b.values.size());
    double sup = 0.0;
    for (std::size_t i = 0; i < a.values.size(); ++i) sup = std::max(sup, std::abs(a.values[i] - b.values[i]));
    return sup;
}

void require_boundary_agreement(const BoundaryCurves& a, const BoundaryCurves& b, double cells) {
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        INFO("t = " << a.times[k]);
        CHECK(std::abs(a.sell_hat[k] - b.sell_hat[k]) <= cells * a.h);
        CHECK(std::isinf(a.buy_hat[k]) == std::isinf(b.buy_hat[k]));
        if (std::isfinite(a.buy_hat[k]) && std::isfinite(b.buy_hat[k])) {
            CHECK(std::abs(a.buy_hat[k] - b.buy_hat[k]) <= cells * a.h);
        }
    }
}

}  // namespace

TEST_CASE("coarse instance: implicit solver matches the explicit oracle") {
    const auto s = coarse_instance();
    const auto implicit = solve(s);
    const auto expl = oracle_solve(s);
    CHECK(sup_gap(implicit, expl) <= 5e-3);
    require_boundary_agreement(extract_boundaries(implicit), extract_boundaries(expl), 2.0);
}

TEST_CASE("oracle terminal slice and obstacle sandwich") {
    const auto f = oracle_solve(coarse_instance(101, 50));
    const int kt = f.terminal_index();
    for (std::size_t i = 0; i < f.nodes(); ++i) REQUIRE(f.at(i, kt) == f.upper[i]);
    for (int k = 0; k < f.slices(); ++k) {
        for (std::size_t i = 0; i < f.nodes(); ++i) {
            REQUIRE(f.at(i, k) >= f.lower[i]);
            REQUIRE(f.at(i, k) <= f.upper[i]);
        }
    }
}

// dt shrinks with h^2: with dt proportional to h the first-order time error
// at the nodes nearest the singularity grows as fast as dt shrinks.
TEST_CASE("oracle gap shrinks under simultaneous refinement") {
    const auto c = coarse_instance(101, 50);
    const auto fn = coarse_instance(201, 200);
    const double coarse_gap = sup_gap(solve(c), oracle_solve(c));
    const double fine_gap = sup_gap(solve(fn), oracle_solve(fn));
    INFO("gaps " << coarse_gap << " -> " << fine_gap);
    CHECK(fine_gap < coarse_gap);
}

TEST_CASE("stationary and CRRA variants agree with the oracle") {
    auto st = coarse_instance();
    st.variant = Variant::infinite_horizon_log;
    st.params.market.T = 2.0;
    const auto a = solve(st);
    const auto b = oracle_solve(st);
    CHECK(sup_gap(a, b) <= 5e-3);
    require_boundary_agreement(extract_boundaries(a), extract_boundaries(b), 2.0);

    auto cr = coarse_instance();
    cr.variant = Variant::crra_no_consumption;
    cr.params.utility = UtilitySpec::crra(-1.0);
    cr.params.costs = {0.05, 0.05};
    const auto c = solve(cr);
    const auto d = oracle_solve(cr);
    CHECK(sup_gap(c, d) <= 5e-3);
    const auto cc = crra_boundaries(c);
    const auto cd = crra_boundaries(d);
    for (std::size_t k = 0; k < cc.size(); ++k) {
        CHECK(std::abs(cc.sell_orig[k] - cd.sell_orig[k]) <= 2.0 * cc.h);
        if (std::isfinite(cc.buy_orig[k]) && std::isfinite(cd.buy_orig[k])) {
            CHECK(std::abs(cc.buy_orig[k] - cd.buy_orig[k]) <= 2.0 * cc.h);
        }
    }
}

TEST_CASE("oracle guards") {
    CHECK_THROWS_AS(oracle_solve(coarse_instance(801, 10)), Error);
    OracleConfig bad;
    bad.cfl_fraction = 1.5;
    CHECK_THROWS_AS(oracle_solve(coarse_instance(), bad), Error);
}
