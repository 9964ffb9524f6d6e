#include <catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "mertc/boundary.hpp"
#include "mertc/montecarlo.hpp"

using namespace mertc;
using Catch::Approx;

namespace {

const SolutionField& coarse_field() {
    static const SolutionField f = [] {
        ProblemSpec s;
        s.params.costs = {0.1, 0.1};
        s.grid.n_space = 401;
        s.grid.n_time = 80;
        return solve(s);
    }();
    return f;
}

SimConfig small_sim(int paths = 2000, int steps = 200) {
    SimConfig s;
    s.n_paths = paths;
    s.n_steps = steps;
    return s;
}

// Discounted log utility of the all-bond investor by composite Simpson quadrature.
double all_bond_utility(const MarketParams& m, double x0) {
    const double c0 = x0 / discount_factor(m, 0.0);
    const auto integrand = [&](double s) { return std::exp(-m.beta * s) * (std::log(c0) + (m.r - m.beta) * s); };
    const int n = 20000;
    const double h = m.T / n;
    double sum = integrand(0.0) + integrand(m.T);
    for (int i = 1; i < n; ++i) sum += (i % 2 ? 4.0 : 2.0) * integrand(i * h);
    const double terminal = x0 * std::exp((m.r - m.beta) * m.T) / discount_factor(m, 0.0);
    return sum * h / 3.0 + std::exp(-m.beta * m.T) * std::log(terminal);
}

}  // namespace

TEST_CASE("all-bond investor matches the deterministic closed form") {
    const auto& f = coarse_field();
    auto curves = extract_boundaries(f);
    std::fill(curves.buy_hat.begin(), curves.buy_hat.end(), no_buy_boundary);
    for (int steps : {7, 200}) {
        auto sim = small_sim(4, steps);
        sim.x0 = 2.5;
        const auto r = simulate_policy(curves, f, sim);
        CHECK(r.mean == Approx(all_bond_utility(f.spec.params.market, 2.5)).margin(1e-6));
        CHECK(r.frac_hold == 1.0);
        CHECK(r.mean_trades == 0.0);
    }
}

TEST_CASE("reflection keeps every post-trade ratio inside the band") {
    const auto& f = coarse_field();
    const auto r = simulate_policy(extract_boundaries(f), f, small_sim());
    CHECK(r.max_excursion <= 1e-12);
    CHECK(r.frac_sell + r.frac_hold + r.frac_buy == Approx(1.0).margin(1e-15));
    CHECK(r.frac_hold > 0.9);
    CHECK(r.std_error > 0.0);
    CHECK(r.insolvent_paths == 0);
    CHECK(r.mean_bought > 0.0);  // initial jump out of the all-bond position
}

TEST_CASE("fixed seed gives bit-identical results for any worker count") {
    const auto& f = coarse_field();
    const auto curves = extract_boundaries(f);
    auto sim = small_sim(3000, 100);
    sim.keep_paths = true;
    const auto a = simulate_policy(curves, f, sim);
    sim.workers = 3;
    const auto b = simulate_policy(curves, f, sim);
    CHECK(a.mean == b.mean);
    CHECK(a.std_error == b.std_error);
    CHECK(a.path_utility == b.path_utility);
    sim.seed += 1;
    CHECK(simulate_policy(curves, f, sim).mean != a.mean);
}

TEST_CASE("standard error scales as one over the square root of the path count") {
    const auto& f = coarse_field();
    const auto curves = extract_boundaries(f);
    std::vector<double> se;
    for (int n : {2500, 10000, 40000}) se.push_back(simulate_policy(curves, f, small_sim(n, 200)).std_error);
    CHECK(se[0] / se[1] == Approx(2.0).epsilon(0.2));
    CHECK(se[1] / se[2] == Approx(2.0).epsilon(0.2));
}

TEST_CASE("perturbation study on a coarse field") {
    const auto& f = coarse_field();
    const auto curves = extract_boundaries(f);
    const auto st = perturbation_study(curves, f, small_sim(4000, 200), {-0.2, 0.0, 0.2});
    REQUIRE(st.rows.size() == 4);
    CHECK(st.rows[st.base].shift == 0.0);
    CHECK(st.rows[st.base].gap == 0.0);
    CHECK(st.base_within_two_se);
    CHECK(st.has_collapse);
    CHECK(st.collapse_worse);
    for (const auto& row : st.rows) CHECK(row.result.insolvent_paths == 0);

    std::ostringstream os;
    write_path_csv(os, st.rows[0].result);
    CHECK(os.str().rfind("path,utility\n0,", 0) == 0);
}

TEST_CASE("repeated zero shift reproduces the estimate bit for bit") {
    const auto& f = coarse_field();
    const auto curves = extract_boundaries(f);
    const auto st = perturbation_study(curves, f, small_sim(1000, 100), {0.0, 0.0}, false);
    CHECK(st.rows[0].result.mean == st.rows[1].result.mean);
    CHECK(st.rows[1].gap == 0.0);
}

TEST_CASE("shift and collapse constructions") {
    const auto curves = extract_boundaries(coarse_field());
    const auto up = shift_curves(curves, 0.1);
    for (std::size_t k = 0; k < curves.size(); ++k) {
        CHECK(1.0 + up.sell_hat[k] == Approx(1.1 * (1.0 + curves.sell_hat[k])));
        if (std::isinf(curves.buy_hat[k])) CHECK(std::isinf(up.buy_hat[k]));
    }
    CHECK_THROWS_AS(shift_curves(curves, -1.0), Error);
    const auto narrow = collapse_curves(curves, -0.8621, 0.01);
    CHECK(narrow.sell_hat.front() < -0.8621);
    CHECK(narrow.buy_hat.front() > -0.8621);
    CHECK_THROWS_AS(perturbation_study(curves, coarse_field(), small_sim(), {0.1, 0.2}), Error);
}

TEST_CASE("a policy that levers into ruin is reported as a solver failure") {
    const auto& f = coarse_field();
    auto curves = extract_boundaries(f);
    std::fill(curves.sell_hat.begin(), curves.sell_hat.end(), -0.9995);
    std::fill(curves.buy_hat.begin(), curves.buy_hat.end(), -0.999);
    try {
        (void)simulate_policy(curves, f, small_sim(200, 200));
        FAIL("expected insolvency");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::solver);
    }
}

TEST_CASE("simulation input validation") {
    const auto& f = coarse_field();
    const auto curves = extract_boundaries(f);
    auto bad = small_sim();
    bad.y0 = -1.0;
    CHECK_THROWS_AS(simulate_policy(curves, f, bad), Error);
    bad = small_sim();
    bad.x0 = -0.5;
    bad.y0 = 0.5;  // liquidation value 0.45 - 0.5 < 0
    CHECK_FALSE(validate(bad, f.spec.params.costs).empty());
    auto shorter = curves;
    shorter.resize(3);
    CHECK_THROWS_AS(simulate_policy(shorter, f, small_sim()), Error);
}
