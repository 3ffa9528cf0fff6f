#include <doctest.h>

#include <cmath>
#include <set>

#include "mfrbsde/battery.hpp"
#include "mfrbsde/errors.hpp"
#include "mfrbsde/snell.hpp"

using namespace mfrbsde;

namespace {

FrozenInputs trivial_frozen(const Lattice& lat) {
    FrozenInputs frozen;
    frozen.laws.assign(static_cast<std::size_t>(lat.levels()), MarginalLaw::dirac(0.0));
    return frozen;
}

StoppingRule stop_at_terminal(int depth) {
    StoppingRule rule{depth, 0};
    for (std::uint32_t p = 0; p < (1u << depth); ++p)
        rule.stop_mask |= std::uint64_t{1} << tree_node_index(depth, p);
    return rule;
}

}  // namespace

TEST_CASE("rule counts follow f(k) = 1 + f(k-1)^2") {
    CHECK(enumerate_stopping_rules(0).size() == 1);
    CHECK(enumerate_stopping_rules(1).size() == 2);
    CHECK(enumerate_stopping_rules(2).size() == 5);
    CHECK(enumerate_stopping_rules(3).size() == 26);
    CHECK(enumerate_stopping_rules(4).size() == 677);
    CHECK_THROWS_AS(enumerate_stopping_rules(6), ConfigError);
}

TEST_CASE("enumerated rules are valid and duplicate-free") {
    for (int depth : {1, 2, 3, 4}) {
        const auto rules = enumerate_stopping_rules(depth);
        std::set<std::uint64_t> seen;
        for (const auto& rule : rules) {
            CHECK(validate_rule(rule));
            CHECK(seen.insert(rule.stop_mask).second);
        }
    }
    StoppingRule never{2, 0};
    CHECK_FALSE(validate_rule(never));
    StoppingRule twice{1, 0b111};  // stops at root and at both leaves
    CHECK_FALSE(validate_rule(twice));
}

TEST_CASE("g_evaluate basics") {
    const Lattice lat = Lattice::build(1.0, 2);
    DriverSpec zero;
    zero.expr = parse_expr("0");
    const FrozenInputs frozen = trivial_frozen(lat);

    SUBCASE("martingale payoff evaluates to zero at the root") {
        NodeProcess payoff = lat.make_process();
        for (int i = 0; i <= 2; ++i) {
            const auto b = lat.values(i);
            for (std::size_t j = 0; j < b.size(); ++j) payoff[i][j] = b[j];
        }
        const auto v = g_evaluate(lat, zero, frozen, stop_at_terminal(2), payoff);
        CHECK(v.root() == 0.0);
    }
    SUBCASE("constant payoff is constant under any rule") {
        NodeProcess payoff = lat.make_process();
        for (auto& level : payoff.levels)
            for (auto& x : level) x = 4.25;
        for (const auto& rule : enumerate_stopping_rules(2)) {
            const auto v = g_evaluate(lat, zero, frozen, rule, payoff);
            CHECK(v.root() == 4.25);
        }
    }
    SUBCASE("unit driver, stop at level 1, zero payoff: one drift step") {
        DriverSpec one;
        one.expr = parse_expr("1");
        StoppingRule rule{2, 0};
        rule.stop_mask |= std::uint64_t{1} << tree_node_index(1, 0);
        rule.stop_mask |= std::uint64_t{1} << tree_node_index(1, 1);
        REQUIRE(validate_rule(rule));
        const auto v = g_evaluate(lat, one, frozen, rule, lat.make_process());
        CHECK(v.root() == doctest::Approx(lat.grid().dt).epsilon(1e-15));
    }
}

TEST_CASE("stop-at-terminal rule reproduces solve_bsde exactly") {
    battery::Rng rng(11);
    for (int depth : {2, 3, 4}) {
        const auto inst = battery::make_snell_instance(depth, rng);
        const auto xi = inst.terminal.realize(inst.lat);
        const auto pair = solve_bsde_range(inst.lat, inst.driver, inst.frozen, xi, 0, depth);
        NodeProcess payoff = inst.obstacle;
        payoff[depth].assign(xi.begin(), xi.end());
        const auto v = g_evaluate(inst.lat, inst.driver, inst.frozen, stop_at_terminal(depth),
                                  payoff);
        CHECK(v.root() == pair.y[0][0]);  // identical arithmetic, bit-exact
    }
}

TEST_CASE("hand-computed optimal stopping value at depth 2") {
    // zero driver, xi = max(B_T, 0), obstacle max(B_t, 0): root value sqrt(2)/4.
    const Lattice lat = Lattice::build(1.0, 2);
    DriverSpec zero;
    zero.expr = parse_expr("0");
    TerminalCondition xi{parse_expr("max(b, 0)")};
    NodeProcess obstacle = lat.make_process();
    for (int i = 0; i <= 2; ++i) {
        const auto b = lat.values(i);
        for (std::size_t j = 0; j < b.size(); ++j) obstacle[i][j] = std::max(b[j], 0.0);
    }
    const double v = snell_bruteforce(lat, zero, trivial_frozen(lat), xi, obstacle);
    CHECK(v == doctest::Approx(std::sqrt(2.0) / 4.0).epsilon(1e-15));
    CHECK(v == doctest::Approx(0.353553).epsilon(1e-5));
}

TEST_CASE("deterministic decreasing obstacle is stopped immediately") {
    for (int depth : {1, 2, 3}) {
        const Lattice lat = Lattice::build(1.0, depth);
        DriverSpec zero;
        zero.expr = parse_expr("0");
        TerminalCondition xi{parse_expr("0")};
        NodeProcess obstacle = lat.make_process();
        for (int i = 0; i <= depth; ++i)
            for (auto& x : obstacle[i]) x = 1.0 - lat.grid().time_at(i);
        const double v = snell_bruteforce(lat, zero, trivial_frozen(lat), xi, obstacle);
        CHECK(v == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("brute force dominates every single rule and a far obstacle never binds") {
    battery::Rng rng(17);
    const auto inst = battery::make_snell_instance(3, rng);
    const auto xi = inst.terminal.realize(inst.lat);

    NodeProcess payoff = inst.obstacle;
    payoff[3].assign(xi.begin(), xi.end());
    const double best = snell_bruteforce(inst.lat, inst.driver, inst.frozen, inst.terminal,
                                         inst.obstacle);
    for (const auto& rule : enumerate_stopping_rules(3)) {
        const double v = g_evaluate(inst.lat, inst.driver, inst.frozen, rule, payoff).root();
        CHECK(best >= v - 1e-15);
    }

    NodeProcess far = inst.lat.make_process();
    for (auto& level : far.levels)
        for (auto& x : level) x = -1e6;
    const double unconstrained = snell_bruteforce(inst.lat, inst.driver, inst.frozen,
                                                  inst.terminal, far);
    const auto pair = solve_bsde_range(inst.lat, inst.driver, inst.frozen, xi, 0, 3);
    CHECK(unconstrained == doctest::Approx(pair.y[0][0]).epsilon(1e-14));
}

TEST_CASE("terminal compatibility is validated") {
    const Lattice lat = Lattice::build(1.0, 2);
    DriverSpec zero;
    zero.expr = parse_expr("0");
    TerminalCondition xi{parse_expr("0")};
    NodeProcess obstacle = lat.make_process();
    for (auto& level : obstacle.levels)
        for (auto& x : level) x = 1.0;  // exceeds xi at the terminal
    CHECK_THROWS_AS(snell_bruteforce(lat, zero, trivial_frozen(lat), xi, obstacle), ConfigError);
}
