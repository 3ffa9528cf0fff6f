#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mfrbsde/errors.hpp"
#include "mfrbsde/harness.hpp"

using namespace mfrbsde;
namespace hn = mfrbsde::harness;
using nlohmann::json;

namespace {

json minimal_config() {
    return {
        {"schema_version", 1},
        {"T", 1.0},
        {"n_steps", 16},
        {"p_exponent", 2.0},
        {"regime", "lipschitz"},
        {"terminal", {{"expr", "b"}}},
        {"driver", {{"expr", "0"}, {"lambda", 0.0}}},
        {"obstacle", {{"expr", "-1000000"}, {"gamma1", 0.0}, {"gamma2", 0.0}}},
        {"solver", {{"tol", 1e-9}, {"max_iter", 50}}},
    };
}

}  // namespace

TEST_CASE("minimal config loads and solves") {
    const Problem prob = hn::problem_from_json(minimal_config());
    CHECK(prob.regime == ProblemRegime::Lipschitz);
    const auto [triple, result] = hn::run_solve(prob);
    CHECK(result.y0 == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(result.skorokhod <= 1e-10);
    CHECK(result.iterations.converged);
    const json summary = result.to_json();
    CHECK(summary.contains("y0"));
    CHECK(summary.contains("gate"));
}

TEST_CASE("config validation errors") {
    SUBCASE("missing keys") {
        json cfg = minimal_config();
        cfg.erase("driver");
        CHECK_THROWS_AS(hn::problem_from_json(cfg), ConfigError);
        cfg = minimal_config();
        cfg["driver"].erase("lambda");
        CHECK_THROWS_AS(hn::problem_from_json(cfg), ConfigError);
    }
    SUBCASE("expression parse failure carries the offset") {
        json cfg = minimal_config();
        cfg["driver"]["expr"] = "0.5*unknown_name";
        try {
            hn::problem_from_json(cfg);
            FAIL("expected ConfigError");
        } catch (const ConfigError& e) {
            const std::string msg = e.what();
            CHECK(msg.find("unknown_name") != std::string::npos);
            CHECK(msg.find("byte") != std::string::npos);
        }
    }
    SUBCASE("variable misuse is rejected") {
        json cfg = minimal_config();
        cfg["terminal"]["expr"] = "y";
        CHECK_THROWS_AS(hn::problem_from_json(cfg), ConfigError);
        cfg = minimal_config();
        cfg["obstacle"]["expr"] = "z";
        CHECK_THROWS_AS(hn::problem_from_json(cfg), ConfigError);
    }
    SUBCASE("terminal compatibility at load") {
        json cfg = minimal_config();
        cfg["terminal"]["expr"] = "0";
        cfg["obstacle"]["expr"] = "1";
        CHECK_THROWS_AS(hn::problem_from_json(cfg), ConfigError);
    }
    SUBCASE("negative constants") {
        json cfg = minimal_config();
        cfg["obstacle"]["gamma1"] = -0.1;
        CHECK_THROWS_AS(hn::problem_from_json(cfg), ConfigError);
    }
    SUBCASE("unbounded regime demands convexity") {
        json cfg = minimal_config();
        cfg["regime"] = "quadratic_unbounded";
        cfg["driver"] = {{"expr", "-0.5*sq(z)"}, {"alpha", 0.0}, {"beta", 0.0}, {"gamma", 1.0}};
        CHECK_THROWS_AS(hn::problem_from_json(cfg), ConfigError);
        cfg["driver"]["convexity"] = "concave";
        CHECK_NOTHROW(hn::problem_from_json(cfg));
    }
}

TEST_CASE("gate summary per regime and gate errors") {
    {
        const json gate = hn::gate_summary(hn::problem_from_json(minimal_config()));
        CHECK(gate["regime"] == "lipschitz");
        CHECK(gate["accept"] == true);
    }
    {
        json cfg = minimal_config();
        cfg["terminal"]["expr"] = "max(b, 0)";
        cfg["obstacle"] = {{"expr", "0.6*y + 0.6*m1 - 1"}, {"gamma1", 0.6}, {"gamma2", 0.6}};
        CHECK_THROWS_AS(hn::gate_summary(hn::problem_from_json(cfg)), GateError);
    }
    {
        // obstacle with gamma1 = 1 under the unbounded gate: 4(g1+g2) >= 1
        json cfg = minimal_config();
        cfg["regime"] = "quadratic_unbounded";
        cfg["driver"] = {{"expr", "-0.5*sq(z)"},
                         {"alpha", 0.0},
                         {"beta", 0.0},
                         {"gamma", 1.0},
                         {"convexity", "concave"}};
        cfg["obstacle"] = {{"expr", "y - 2"}, {"gamma1", 1.0}, {"gamma2", 0.0}};
        cfg["terminal"]["expr"] = "max(b, 0)";
        const Problem prob = hn::problem_from_json(cfg);
        CHECK_THROWS_AS(hn::gate_summary(prob), GateError);
    }
}

TEST_CASE("CSV emission is byte-deterministic and has the documented header") {
    json cfg = minimal_config();
    cfg["terminal"]["expr"] = "max(b, 0)";
    cfg["driver"] = {{"expr", "0.2*m1"}, {"lambda", 0.2}};
    const Problem prob = hn::problem_from_json(cfg);

    const auto run1 = hn::run_solve(prob);
    const auto run2 = hn::run_solve(prob);
    const Lattice lat = make_lattice(prob);
    const std::string csv1 = hn::solution_csv(lat, run1.first);
    const std::string csv2 = hn::solution_csv(lat, run2.first);
    CHECK(csv1 == csv2);
    CHECK(csv1.substr(0, 21) == "level,node,t,b,y,z,k\n");

    // terminal rows leave z empty
    const std::string last_line = csv1.substr(csv1.rfind("16,16,"));
    CHECK(last_line.find(",,") != std::string::npos);
}

TEST_CASE("oracle cases and exit semantics") {
    const auto snell = hn::run_oracle("snell", 2, 0);
    CHECK(snell.size() == 50);
    for (const auto& row : snell) {
        CHECK(row.pass);
        CHECK(row.gap <= 1e-12);
    }
    const auto ch = hn::run_oracle("colehopf", 0, 32);
    REQUIRE(ch.size() == 2);
    CHECK(ch[0].pass);
    CHECK(ch[1].pass);
    CHECK_THROWS_AS(hn::run_oracle("bogus", 0, 0), ConfigError);
    CHECK_THROWS_AS(hn::run_oracle("snell", 5, 0), ConfigError);
}

TEST_CASE("study rows on an exactly-integrable instance") {
    json cfg = minimal_config();
    cfg["terminal"]["expr"] = "0";
    cfg["driver"] = {{"expr", "1"}, {"lambda", 0.0}};
    const Problem prob = hn::problem_from_json(cfg);
    const auto rows = hn::run_study(prob, {8, 16, 32});
    REQUIRE(rows.size() == 3);
    for (const auto& row : rows) {
        CHECK(row.y0 == doctest::Approx(1.0).epsilon(1e-13));
        CHECK(row.diff_to_finest <= 1e-13);  // pure drift is exact at every n
    }
    const std::string csv = hn::study_csv(rows);
    CHECK(csv.substr(0, 36) == "n,y0,diff_to_finest,iterations,ratio");
}

TEST_CASE("study ratios on a first-order instance sit near one half") {
    json cfg = minimal_config();
    cfg["regime"] = "quadratic_bounded";
    cfg["terminal"]["expr"] = "abs(b)";
    cfg["driver"] = {{"expr", "0.5*sq(z)"},
                     {"alpha", 0.0},
                     {"beta", 0.0},
                     {"gamma", 1.0},
                     {"convexity", "convex"}};
    const Problem prob = hn::problem_from_json(cfg);
    const auto rows = hn::run_study(prob, {8, 16, 32, 64});
    REQUIRE(rows.size() == 4);
    for (std::size_t k = 2; k < rows.size(); ++k) {
        REQUIRE(rows[k].has_ratio);
        CHECK(rows[k].ratio > 0.4);
        CHECK(rows[k].ratio < 0.6);
    }
}

TEST_CASE("malformed config files become ConfigError, not crashes") {
    const char* path = "mfrbsde_test_bad_config.json";
    {
        std::ofstream out(path);
        out << "{ not json";
    }
    CHECK_THROWS_AS(hn::load_problem(path), ConfigError);
    std::remove(path);
    CHECK_THROWS_AS(hn::load_problem("does_not_exist_anywhere.json"), ConfigError);
}

TEST_CASE("probe warnings surface in load_problem") {
    const char* path = "mfrbsde_test_probe_config.json";
    {
        json cfg = minimal_config();
        cfg["driver"] = {{"expr", "sq(y)"}, {"lambda", 0.5}};  // quotient far above 0.5
        std::ofstream out(path);
        out << cfg.dump();
    }
    const auto loaded = hn::load_problem(path);
    CHECK_FALSE(loaded.warnings.empty());
    std::remove(path);
}
