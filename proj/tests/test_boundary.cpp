#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mertc/boundary.hpp"
#include "mertc/oracle.hpp"

using namespace mertc;
using Catch::Approx;

namespace {

ProblemSpec coarse_spec(Variant v = Variant::log_consumption_hat) {
    ProblemSpec s;
    s.variant = v;
    s.params.costs = {0.1, 0.1};
    s.params.utility = v == Variant::crra_no_consumption ? UtilitySpec::crra(-1.0) : UtilitySpec::log();
    s.grid.n_space = 401;
    s.grid.n_time = 4;
    return s;
}

/// v = upper up to `kink`, then upper - slope (x - kink), floored at the lower obstacle.
SolutionField synthetic(const ProblemSpec& s, double kink, double slope) {
    auto f = make_field(s, s.grid.n_time + 1, false);
    for (int k = 0; k < f.slices(); ++k) {
        auto v = f.slice(k);
        for (std::size_t i = 0; i < f.nodes(); ++i) {
            const double x = f.grid.x[i];
            v[i] = k == f.terminal_index() || x <= kink ? f.upper[i]
                                                         : std::max(f.lower[i], f.upper[i] - slope * (x - kink));
        }
        classify_contact(f.slice(k), f.lower, f.upper, f.contact_slice(k));
    }
    return f;
}

// Root of upper(x) - slope (x - kink) - lower(x) by bisection.
double synthetic_buy(const Obstacles& o, double kink, double slope) {
    double a = kink, b = 20.0;
    for (int it = 0; it < 200; ++it) {
        const double m = 0.5 * (a + b);
        (o.upper(m) - slope * (m - kink) - o.lower(m) > 0.0 ? a : b) = m;
    }
    return 0.5 * (a + b);
}

}  // namespace

TEST_CASE("constructed crossing is located within a cell") {
    const auto s = coarse_spec();
    const auto f = synthetic(s, 0.5, 0.01);
    const auto c = extract_boundaries(f);
    REQUIRE(c.size() == static_cast<std::size_t>(s.grid.n_time));
    const double buy = synthetic_buy(Obstacles::for_spec(s), 0.5, 0.01);
    for (std::size_t k = 0; k < c.size(); ++k) {
        CHECK(c.sell_hat[k] == Approx(0.5).margin(f.grid.h));
        CHECK(c.buy_hat[k] == Approx(buy).margin(f.grid.h));
        CHECK(c.sell_hat[k] < c.buy_hat[k]);
    }
}

TEST_CASE("constructed crossing on a CRRA field") {
    const auto s = coarse_spec(Variant::crra_no_consumption);
    const auto f = synthetic(s, 0.5, 0.01);
    const auto c = crra_boundaries(f);
    const double buy = synthetic_buy(Obstacles::for_spec(s), 0.5, 0.01);
    for (std::size_t k = 0; k < c.size(); ++k) {
        CHECK(c.sell_orig[k] == Approx(0.5).margin(f.grid.h));
        CHECK(c.buy_orig[k] == Approx(buy).margin(f.grid.h));
    }
    CHECK_THROWS_AS(extract_boundaries(f), Error);
}

TEST_CASE("no lower contact gives the +inf buy sentinel") {
    const auto s = coarse_spec();
    const auto f = synthetic(s, 0.5, 1e-6);
    const auto c = extract_boundaries(f);
    for (std::size_t k = 0; k < c.size(); ++k) {
        CHECK(std::isinf(c.buy_hat[k]));
        CHECK(std::isinf(c.buy_orig[k]));
        CHECK(c.sell_hat[k] < c.buy_hat[k]);
    }
}

TEST_CASE("terminal slice has no boundary") {
    const auto f = synthetic(coarse_spec(), 0.5, 0.01);
    CHECK_THROWS_AS(extract_slice(f, f.terminal_index()), Error);
}

TEST_CASE("coordinate maps") {
    BoundaryCurves c;
    c.resize(1);
    c.sell_hat[0] = -0.5;
    c.buy_hat[0] = 3.0;
    const auto a = to_original(c, {0.1, 0.1});
    CHECK(a.sell_orig[0] == Approx(-0.45));
    CHECK(a.sell_adjusted[0] == -0.5);
    const CostParams two{0.6, 0.2};  // theta = 2
    REQUIRE(two.theta() == Approx(2.0));
    const auto b = to_original(c, two);
    CHECK(b.buy_orig[0] == Approx(2.4));
    CHECK(b.buy_adjusted[0] == Approx(1.5));
}

TEST_CASE("coordinate identities hold on solved curves") {
    auto s = coarse_spec();
    s.grid.n_time = 80;
    const auto f = solve(s);
    const auto c = extract_boundaries(f);
    const double th = s.params.costs.theta();
    const double keep = 1.0 - s.params.costs.mu;
    for (std::size_t k = 0; k < c.size(); ++k) {
        REQUIRE(c.sell_adjusted[k] == c.sell_hat[k]);
        REQUIRE(c.sell_orig[k] / keep == Approx(c.sell_hat[k]).epsilon(1e-15));
        if (std::isfinite(c.buy_hat[k])) REQUIRE(c.buy_adjusted[k] * th == Approx(c.buy_hat[k]).epsilon(1e-15));
        REQUIRE(c.sell_hat[k] > -1.0);
        REQUIRE(c.sell_hat[k] < c.buy_hat[k]);
    }
}

TEST_CASE("near expiry the buy boundary is absent") {
    ProblemSpec s;
    s.params.costs = {0.1, 0.1};
    s.grid.n_space = 201;
    s.grid.n_time = 100;
    s.params.market.T = 0.5;
    const auto f = solve(s);
    const auto o = oracle_solve(s);
    const auto a = extract_boundaries(f);
    const auto b = extract_boundaries(o);
    const auto last = a.size() - 1;
    CHECK(std::isinf(a.buy_hat[last]));
    CHECK(std::isinf(b.buy_hat[last]));
}

TEST_CASE("no-leverage market keeps both boundaries nonnegative") {
    auto s = coarse_spec();
    s.grid.n_time = 160;
    s.params.market = {0.05, 0.01, 0.3, 0.1, 2.0};
    const auto c = extract_boundaries(solve(s));
    const double tol = 2.0 * c.h;
    for (std::size_t k = 0; k < c.size(); ++k) {
        CHECK(c.sell_orig[k] >= -tol);
        CHECK(c.buy_orig[k] >= -tol);
    }
}

TEST_CASE("CSV layout") {
    BoundaryCurves c;
    c.resize(1);
    c.buy_hat[0] = c.buy_orig[0] = c.buy_adjusted[0] = no_buy_boundary;
    std::ostringstream os;
    write_csv(os, c);
    CHECK(os.str() == "t,sell_hat,buy_hat,sell_orig,buy_orig,sell_adjusted,buy_adjusted\n0,0,inf,0,inf,0,inf\n");
}
