#include <catch_amalgamated.hpp>

#include "mertc/config.hpp"
#include "mertc/report.hpp"

using namespace mertc;

TEST_CASE("defaults validate") {
    RunConfig c;
    CHECK(validate(c).empty());
    CHECK(c.spec.params.market.alpha == 0.3);
    CHECK(c.sim.n_paths == 50000);
    CHECK(c.sim.n_steps == 2000);
}

TEST_CASE("text format with comments and lists") {
    RunConfig c;
    apply_text(c,
               "# market\n"
               "alpha = 0.25   # trailing comment\n"
               "\n"
               "lambda=0.02\n"
               "sweep.values = 0.01, 0.02,0.3\n"
               "problem = crra\n"
               "gamma = -2\n"
               "sim.perturb = yes\n");
    CHECK(c.spec.params.market.alpha == 0.25);
    CHECK(c.spec.params.costs.lambda == 0.02);
    CHECK(c.sweep.values == std::vector<double>{0.01, 0.02, 0.3});
    CHECK(c.spec.variant == Variant::crra_no_consumption);
    CHECK(c.spec.params.utility.kind == UtilityKind::crra_no_consumption);
    CHECK(c.spec.params.utility.gamma == -2.0);
    CHECK(c.perturb);
}

TEST_CASE("errors name the key and line") {
    RunConfig c;
    CHECK_THROWS_WITH(apply_text(c, "alpha = 0.3\nbogus = 1\n"), Catch::Matchers::ContainsSubstring("config:2"));
    CHECK_THROWS_WITH(apply_text(c, "alpha = abc\n"), Catch::Matchers::ContainsSubstring("alpha"));
    CHECK_THROWS_AS(apply_text(c, "alpha 0.3\n"), Error);
    CHECK_THROWS_AS(apply_override(c, "grid.n_space=1.5"), Error);
    CHECK_THROWS_AS(apply_override(c, "cache=maybe"), Error);
    CHECK_THROWS_AS(apply_override(c, "problem=power"), Error);
}

TEST_CASE("canonical text round-trips and the hash tracks every change") {
    RunConfig a;
    apply_override(a, "beta=0.37");
    apply_override(a, "sim.shifts=-0.1,0,0.1");
    RunConfig b;
    apply_text(b, canonical_text(a));
    CHECK(canonical_text(a) == canonical_text(b));
    CHECK(config_hash(a) == config_hash(b));

    const auto base = config_hash(RunConfig{});
    for (const char* o : {"alpha=0.31", "grid.n_time=801", "sim.seed=5", "sweep.time=0.5",
                          "solver.omega=1.4", "problem=stationary"}) {
        RunConfig c;
        apply_override(c, o);
        INFO(o);
        CHECK(config_hash(c) != base);
    }
    for (const char* o : {"out=elsewhere", "workers=3", "cache=false"}) {
        RunConfig c;
        apply_override(c, o);
        INFO(o);
        CHECK(config_hash(c) == base);
    }
}

TEST_CASE("run validation collects violations") {
    RunConfig c;
    apply_override(c, "alpha=0.001");
    apply_override(c, "sim.y0=-1");
    apply_override(c, "sweep.time=5");
    CHECK(validate(c).size() >= 3);
    CHECK_THROWS_AS(require_valid(c), Error);
}

TEST_CASE("json numbers encode non-finite values as strings") {
    CHECK(number(1.5) == 1.5);
    CHECK(number(no_buy_boundary) == "inf");
    CHECK(number(std::nan("")) == "nan");
    RunConfig c;
    const auto j = run_header(c, "solve");
    CHECK(j["config_hash"] == config_hash(c));
    CHECK(j["config"]["alpha"] == "0.29999999999999999");
}
