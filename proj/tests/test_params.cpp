#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "mertc/params.hpp"

using namespace mertc;
using Catch::Approx;

TEST_CASE("merton line") {
    MarketParams m;
    CHECK(std::round(merton_line(m) * 1e4) / 1e4 == Approx(-0.8621).margin(1e-12));
    // closed form -(alpha - r - sigma^2) / (alpha - r), evaluated independently
    CHECK(merton_line(m) == Approx(-(0.29 - 0.04) / 0.29).epsilon(1e-14));

    m.alpha = m.r + m.sigma * m.sigma;
    CHECK(merton_line(m) == Approx(0.0).margin(1e-15));
    for (double s : {0.1, 0.2, 0.45}) {
        m.sigma = s;
        m.alpha = m.r + 0.5 * s * s;
        CHECK(merton_line(m) == Approx(1.0).epsilon(1e-14));
    }
}

TEST_CASE("CRRA frictionless line reduces to the log one at gamma = 0") {
    MarketParams m;
    CHECK(crra_merton_line(m, 0.0) == Approx(merton_line(m)).epsilon(1e-14));
}

TEST_CASE("merged cost parameter") {
    CHECK(theta(CostParams{0.1, 0.1}) == Approx(11.0 / 9.0).epsilon(1e-15));
    CHECK(theta(CostParams{0.0, 0.5}) == Approx(2.0).epsilon(1e-15));
    CHECK(theta(CostParams{0.2, 0.0}) == Approx(1.2).epsilon(1e-15));
    CHECK_THROWS_AS(theta(CostParams{0.0, 0.0}), Error);
    CHECK(CostParams::from_theta(1.7).theta() == Approx(1.7).epsilon(1e-15));
}

TEST_CASE("discount factor") {
    MarketParams m;
    CHECK(discount_factor(m, m.T) == 1.0);
    m.beta = 0.5;
    CHECK(discount_factor(m, 0.0) == Approx((1.0 - std::exp(-1.0)) / 0.5 + std::exp(-1.0)).epsilon(1e-14));
    CHECK(std::round(discount_factor(m, 0.0) * 1e4) / 1e4 == Approx(1.6321).margin(1e-12));
    m.beta = 1e-12;
    CHECK(discount_factor(m, 0.5) == Approx(m.T - 0.5 + 1.0).epsilon(1e-9));
    CHECK_THROWS_AS(discount_factor(m, m.T + 0.1), Error);
    CHECK_THROWS_AS(discount_factor(m, -0.1), Error);
}

TEST_CASE("discount factor bounds and monotonicity over random markets") {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> beta(0.01, 3.0), horizon(0.1, 10.0);
    for (int trial = 0; trial < 200; ++trial) {
        MarketParams m;
        m.beta = beta(rng);
        m.T = horizon(rng);
        const double floor = std::min(1.0, 1.0 / m.beta);
        double previous = discount_factor(m, 0.0);
        for (int i = 0; i <= 50; ++i) {
            const double g = discount_factor(m, i == 50 ? m.T : m.T * (i / 50.0));
            REQUIRE(g >= floor - 1e-12);
            if (i > 0) {
                if (m.beta < 1.0) REQUIRE(g <= previous + 1e-14);
                if (m.beta > 1.0) REQUIRE(g >= previous - 1e-14);
            }
            previous = g;
        }
    }
    MarketParams unit;
    unit.beta = 1.0;
    for (double t : {0.0, 0.7, 1.9}) CHECK(discount_factor(unit, t) == Approx(1.0).epsilon(1e-14));
}

TEST_CASE("merton line sign follows alpha - r versus sigma^2") {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> premium(0.001, 0.5), vol(0.05, 0.8);
    for (int trial = 0; trial < 500; ++trial) {
        MarketParams m;
        m.alpha = m.r + premium(rng);
        m.sigma = vol(rng);
        REQUIRE((merton_line(m) >= 0.0) == (m.excess_return() <= m.sigma * m.sigma));
    }
}

namespace {
bool mentions(const std::vector<Violation>& v, const std::string& text) {
    for (const auto& e : v) {
        if (e.message.find(text) != std::string::npos) return true;
    }
    return false;
}
}  // namespace

TEST_CASE("validation") {
    ModelParams ok;
    ok.costs = {0.01, 0.01};
    CHECK(validate(ok).empty());

    auto low = ok;
    low.market.alpha = 0.01;
    low.market.r = 0.02;
    CHECK(mentions(validate(low), "alpha > r required"));

    auto free = ok;
    free.costs = {0.0, 0.0};
    CHECK(mentions(validate(free), "lambda + mu > 0 required"));
    CHECK_THROWS_AS(require_valid(free), Error);

    auto crra = ok;
    crra.utility = UtilitySpec::crra(0.0);
    CHECK(mentions(validate(crra), "gamma != 0"));
    crra.utility = UtilitySpec::crra(1.0);
    CHECK(mentions(validate(crra), "gamma < 1"));
    crra.utility = UtilitySpec::crra(-1.0);
    CHECK(validate(crra).empty());

    auto bad = ok;
    bad.market.sigma = 0.0;
    bad.market.beta = -1.0;
    bad.market.T = 0.0;
    bad.costs.mu = 1.0;
    CHECK(validate(bad).size() >= 4);
}

TEST_CASE("valid costs always give theta > 1") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> lam(0.0, 2.0), mu(0.0, 0.99);
    for (int trial = 0; trial < 1000; ++trial) {
        const CostParams c{lam(rng), mu(rng)};
        if (!(c.lambda + c.mu > 0.0)) continue;
        REQUIRE(c.theta() > 1.0);
    }
}
