#include <doctest.h>

#include <cmath>

#include "mfrbsde/battery.hpp"
#include "mfrbsde/errors.hpp"
#include "mfrbsde/rbsde.hpp"
#include "mfrbsde/snell.hpp"

using namespace mfrbsde;

namespace {

FrozenInputs trivial_frozen(const Lattice& lat) {
    FrozenInputs frozen;
    frozen.laws.assign(static_cast<std::size_t>(lat.levels()), MarginalLaw::dirac(0.0));
    return frozen;
}

NodeProcess constant_obstacle(const Lattice& lat, double value) {
    NodeProcess p = lat.make_process();
    for (auto& level : p.levels)
        for (auto& x : level) x = value;
    return p;
}

void check_triple_invariants(const Lattice& lat, const SolutionTriple& triple,
                             const NodeProcess& obstacle,
                             std::span<const double> xi) {
    const int n = lat.grid().n_steps;
    for (std::size_t j = 0; j < xi.size(); ++j) CHECK(triple.y[n][j] == xi[j]);
    CHECK(triple.k[0][0] == 0.0);
    for (int i = 0; i < n; ++i)
        for (const double d : triple.dk[i]) CHECK(d >= 0.0);
    for (int i = 0; i < n; ++i)
        for (std::size_t j = 0; j < triple.y[i].size(); ++j)
            CHECK(triple.y[i][j] >= obstacle[i][j] - 1e-12);
    CHECK(skorokhod_residual(lat, triple, obstacle) <= 1e-10);
}

}  // namespace

TEST_CASE("a far obstacle never binds: k = 0 and the triple equals solve_bsde") {
    const Lattice lat = Lattice::build(1.0, 16);
    DriverSpec driver;
    driver.expr = parse_expr("0.2*y - 0.1*z");
    driver.lambda = 0.2;
    const FrozenInputs frozen = trivial_frozen(lat);
    TerminalCondition xi{parse_expr("max(b, 0)")};
    const NodeProcess obstacle = constant_obstacle(lat, -1e6);

    const auto triple = solve_reflected(lat, driver, frozen, obstacle, xi);
    const auto pair = solve_bsde(lat, driver, frozen, xi);
    for (int i = 0; i <= 16; ++i)
        for (std::size_t j = 0; j < triple.y[i].size(); ++j) {
            CHECK(triple.y[i][j] == pair.y[i][j]);
            if (i < 16) {
                CHECK(triple.z[i][j] == pair.z[i][j]);
                CHECK(triple.dk[i][j] == 0.0);
                CHECK(triple.k[i][j] == 0.0);
            }
        }
    check_triple_invariants(lat, triple, obstacle, xi.realize(lat));
}

TEST_CASE("deterministic decreasing obstacle: exact Snell envelope") {
    const Lattice lat = Lattice::build(1.0, 20);
    DriverSpec zero;
    zero.expr = parse_expr("0");
    TerminalCondition xi{parse_expr("0")};
    NodeProcess obstacle = lat.make_process();
    for (int i = 0; i <= 20; ++i)
        for (auto& x : obstacle[i]) x = 1.0 - lat.grid().time_at(i);

    const auto triple = solve_reflected(lat, zero, trivial_frozen(lat), obstacle, xi);
    for (int i = 0; i < 20; ++i) {
        const double expect = 1.0 - lat.grid().time_at(i);
        for (std::size_t j = 0; j < triple.y[i].size(); ++j) {
            CHECK(triple.y[i][j] == doctest::Approx(expect).epsilon(1e-14));
            CHECK(triple.z[i][j] == 0.0);
        }
    }
    // K_T accumulates the full obstacle push, exactly T.
    for (const double k : triple.k[20]) CHECK(k == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(skorokhod_residual(lat, triple, obstacle) == 0.0);
    check_triple_invariants(lat, triple, obstacle, xi.realize(lat));
}

TEST_CASE("hand case: reflected value matches the depth-2 stopping oracle") {
    const Lattice lat = Lattice::build(1.0, 2);
    DriverSpec zero;
    zero.expr = parse_expr("0");
    TerminalCondition xi{parse_expr("max(b, 0)")};
    NodeProcess obstacle = lat.make_process();
    for (int i = 0; i <= 2; ++i) {
        const auto b = lat.values(i);
        for (std::size_t j = 0; j < b.size(); ++j) obstacle[i][j] = std::max(b[j], 0.0);
    }
    const auto triple = solve_reflected(lat, zero, trivial_frozen(lat), obstacle, xi);
    CHECK(triple.y[0][0] == doctest::Approx(std::sqrt(2.0) / 4.0).epsilon(1e-15));
}

TEST_CASE("reflected DP equals snell_bruteforce on random frozen batteries") {
    battery::Rng rng(313);
    for (int depth : {2, 3, 4}) {
        for (int k = 0; k < 10; ++k) {
            const auto inst = battery::make_snell_instance(depth, rng);
            const auto xi = inst.terminal.realize(inst.lat);
            const auto triple = solve_reflected_range(inst.lat, inst.driver, inst.frozen,
                                                      inst.obstacle, xi, 0, depth);
            const double oracle = snell_bruteforce(inst.lat, inst.driver, inst.frozen,
                                                   inst.terminal, inst.obstacle);
            CHECK(std::fabs(triple.y[0][0] - oracle) <= 1e-12);
            check_triple_invariants(inst.lat, triple, inst.obstacle, xi);
        }
    }
}

TEST_CASE("raising the obstacle never lowers y; comparison in the terminal") {
    battery::Rng rng(99);
    const auto inst = battery::make_snell_instance(4, rng);
    const auto xi = inst.terminal.realize(inst.lat);
    const auto base = solve_reflected_range(inst.lat, inst.driver, inst.frozen, inst.obstacle,
                                            xi, 0, 4);

    SUBCASE("obstacle monotonicity") {
        NodeProcess raised = inst.obstacle;
        for (int i = 0; i < 4; ++i)
            for (auto& x : raised[i]) x += 0.25;
        const auto up = solve_reflected_range(inst.lat, inst.driver, inst.frozen, raised, xi, 0, 4);
        for (int i = 0; i <= 4; ++i)
            for (std::size_t j = 0; j < base.y[i].size(); ++j)
                CHECK(up.y[i][j] >= base.y[i][j] - 1e-14);
    }
    SUBCASE("terminal comparison") {
        std::vector<double> xi_hi(xi.begin(), xi.end());
        for (auto& v : xi_hi) v += 0.3;
        const auto hi = solve_reflected_range(inst.lat, inst.driver, inst.frozen, inst.obstacle,
                                              xi_hi, 0, 4);
        for (int i = 0; i <= 4; ++i)
            for (std::size_t j = 0; j < base.y[i].size(); ++j)
                CHECK(hi.y[i][j] >= base.y[i][j] - 1e-14);
    }
}

TEST_CASE("cumulative k is probability-consistent with the increments") {
    battery::Rng rng(515);
    const auto inst = battery::make_snell_instance(4, rng);
    const auto xi = inst.terminal.realize(inst.lat);
    const auto triple = solve_reflected_range(inst.lat, inst.driver, inst.frozen, inst.obstacle,
                                              xi, 0, 4);
    // E[K at level L] equals the accumulated expected increments below L.
    double expected = 0.0;
    for (int level = 1; level <= 4; ++level) {
        const auto probs_prev = inst.lat.probs(level - 1);
        for (std::size_t j = 0; j < triple.dk[level - 1].size(); ++j)
            expected += probs_prev[j] * triple.dk[level - 1][j];
        const auto probs = inst.lat.probs(level);
        double mean_k = 0.0;
        for (std::size_t j = 0; j < triple.k[level].size(); ++j)
            mean_k += probs[j] * triple.k[level][j];
        CHECK(mean_k == doctest::Approx(expected).epsilon(1e-13));
    }
}

TEST_CASE("terminal compatibility and step-size errors") {
    const Lattice lat = Lattice::build(1.0, 4);
    DriverSpec zero;
    zero.expr = parse_expr("0");
    TerminalCondition xi{parse_expr("0")};
    CHECK_THROWS_AS(solve_reflected(lat, zero, trivial_frozen(lat),
                                    constant_obstacle(lat, 1.0), xi),
                    ConfigError);

    DriverSpec stiff;
    stiff.expr = parse_expr("5*y");
    stiff.lambda = 5.0;
    const Lattice coarse = Lattice::build(1.0, 4);  // dt = 0.25, lambda dt = 1.25
    CHECK_THROWS_AS(solve_reflected(coarse, stiff, trivial_frozen(coarse),
                                    constant_obstacle(coarse, -1e6), xi),
                    StepSizeError);
}
