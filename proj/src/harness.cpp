#include "mfrbsde/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <sstream>

#include "mfrbsde/battery.hpp"
#include "mfrbsde/errors.hpp"
#include "mfrbsde/snell.hpp"

namespace mfrbsde::harness {

using nlohmann::json;

LogLevel log_level() {
    static const LogLevel level = [] {
        const char* env = std::getenv("MFRBSDE_LOG");
        if (!env) return LogLevel::Info;
        const std::string v(env);
        if (v == "quiet") return LogLevel::Quiet;
        if (v == "debug") return LogLevel::Debug;
        return LogLevel::Info;
    }();
    return level;
}

void log_info(const std::string& msg) {
    if (log_level() >= LogLevel::Info) std::cerr << "[mfrbsde] " << msg << "\n";
}

void log_debug(const std::string& msg) {
    if (log_level() >= LogLevel::Debug) std::cerr << "[mfrbsde:debug] " << msg << "\n";
}

namespace {

const json& require_key(const json& j, const std::string& key, const std::string& where) {
    auto it = j.find(key);
    if (it == j.end()) throw ConfigError("missing key '" + where + key + "'");
    return *it;
}

double require_number(const json& j, const std::string& key, const std::string& where) {
    const json& v = require_key(j, key, where);
    if (!v.is_number()) throw ConfigError("key '" + where + key + "' must be a number");
    return v.get<double>();
}

double nonnegative(double v, const std::string& name) {
    if (v < 0.0) throw ConfigError("constant '" + name + "' must be nonnegative");
    return v;
}

Expr parse_config_expr(const json& obj, const std::string& where) {
    const json& v = require_key(obj, "expr", where);
    if (!v.is_string()) throw ConfigError("key '" + where + "expr' must be a string");
    try {
        return parse_expr(v.get<std::string>());
    } catch (const ParseError& e) {
        throw ConfigError("in '" + where + "expr': " + e.what());
    }
}

void forbid_variable(const Expr& e, Variable v, const std::string& where) {
    if (e.uses(v))
        throw ConfigError("'" + where + "' must not reference variable '" +
                          variable_name(v) + "'");
}

}  // namespace

Problem problem_from_json(const json& config) {
    Problem prob;
    prob.horizon = require_number(config, "T", "");
    if (!(prob.horizon > 0.0)) throw ConfigError("T must be positive");
    const double n = require_number(config, "n_steps", "");
    prob.n_steps = static_cast<int>(n);
    if (prob.n_steps < 1 || prob.n_steps != n) throw ConfigError("n_steps must be a positive integer");

    const std::string regime = require_key(config, "regime", "").get<std::string>();
    if (regime == "lipschitz") prob.regime = ProblemRegime::Lipschitz;
    else if (regime == "quadratic_bounded") prob.regime = ProblemRegime::QuadraticBounded;
    else if (regime == "quadratic_unbounded") prob.regime = ProblemRegime::QuadraticUnbounded;
    else throw ConfigError("unknown regime '" + regime + "'");

    const json& terminal = require_key(config, "terminal", "");
    prob.terminal.expr = parse_config_expr(terminal, "terminal.");
    for (Variable v : {Variable::T, Variable::Y, Variable::Z, Variable::M1, Variable::Am})
        forbid_variable(prob.terminal.expr, v, "terminal.expr");

    const json& driver = require_key(config, "driver", "");
    prob.driver.expr = parse_config_expr(driver, "driver.");
    forbid_variable(prob.driver.expr, Variable::B, "driver.expr");
    prob.driver.alpha = nonnegative(driver.value("alpha", 0.0), "driver.alpha");
    prob.driver.beta = nonnegative(driver.value("beta", 0.0), "driver.beta");
    prob.driver.gamma = nonnegative(driver.value("gamma", 0.0), "driver.gamma");
    prob.driver.kappa = nonnegative(driver.value("kappa", 0.0), "driver.kappa");
    const std::string convexity = driver.value("convexity", "none");
    if (convexity == "none") prob.driver.convexity = Convexity::None;
    else if (convexity == "concave") prob.driver.convexity = Convexity::Concave;
    else if (convexity == "convex") prob.driver.convexity = Convexity::Convex;
    else throw ConfigError("driver.convexity must be none, concave or convex");

    if (prob.regime == ProblemRegime::Lipschitz) {
        prob.driver.lambda = nonnegative(require_number(driver, "lambda", "driver."),
                                         "driver.lambda");
        prob.driver.regime = DriverRegime::Lipschitz;
        prob.p_exponent = require_number(config, "p_exponent", "");
        if (!(prob.p_exponent > 1.0)) throw ConfigError("p_exponent must exceed 1");
    } else {
        prob.driver.regime = DriverRegime::Quadratic;
        for (const char* key : {"alpha", "beta", "gamma"})
            require_number(driver, key, "driver.");
        if (!(prob.driver.gamma > 0.0))
            throw ConfigError("driver.gamma must be positive in quadratic regimes");
        // The (H5') Lipschitz constant defaults to the growth beta.
        prob.driver.lambda = driver.contains("lambda")
                                 ? nonnegative(driver["lambda"].get<double>(), "driver.lambda")
                                 : prob.driver.beta;
        prob.p_exponent = config.value("p_exponent", 2.0);
        if (prob.regime == ProblemRegime::QuadraticUnbounded &&
            prob.driver.convexity == Convexity::None)
            throw ConfigError("quadratic_unbounded requires driver.convexity concave or convex");
    }

    const json& obstacle = require_key(config, "obstacle", "");
    prob.obstacle.expr = parse_config_expr(obstacle, "obstacle.");
    forbid_variable(prob.obstacle.expr, Variable::B, "obstacle.expr");
    forbid_variable(prob.obstacle.expr, Variable::Z, "obstacle.expr");
    prob.obstacle.gamma1 = nonnegative(require_number(obstacle, "gamma1", "obstacle."),
                                       "obstacle.gamma1");
    prob.obstacle.gamma2 = nonnegative(require_number(obstacle, "gamma2", "obstacle."),
                                       "obstacle.gamma2");
    if (obstacle.contains("bound")) prob.obstacle.bound = obstacle["bound"].get<double>();

    if (config.contains("solver")) {
        const json& solver = config["solver"];
        prob.solver.tol = solver.value("tol", 1e-9);
        if (!(prob.solver.tol > 0.0)) throw ConfigError("solver.tol must be positive");
        prob.solver.max_iter = solver.value("max_iter", 50);
        if (prob.solver.max_iter < 1) throw ConfigError("solver.max_iter must be >= 1");
        prob.solver.m_max = solver.value("m_max", 60);
        if (solver.contains("window_override"))
            prob.solver.window_override = solver["window_override"].get<double>();
    }

    const Lattice lat = make_lattice(prob);
    validate_terminal_compatibility(prob, lat);
    return prob;
}

LoadedProblem load_problem(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    json config;
    try {
        in >> config;
    } catch (const json::exception& e) {
        throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
    }

    LoadedProblem loaded{problem_from_json(config), {}};

    char buf[160];
    for (const ProbeFlag& f : lipschitz_probe(loaded.problem.driver, 21).flags) {
        std::snprintf(buf, sizeof(buf),
                      "driver %s-quotient %.3g at %.3g exceeds declared %.3g",
                      f.slot.c_str(), f.quotient, f.at, f.declared);
        loaded.warnings.emplace_back(buf);
    }
    for (const ProbeFlag& f : lipschitz_probe(loaded.problem.obstacle, 21).flags) {
        std::snprintf(buf, sizeof(buf),
                      "obstacle %s-quotient %.3g at %.3g exceeds declared %.3g",
                      f.slot.c_str(), f.quotient, f.at, f.declared);
        loaded.warnings.emplace_back(buf);
    }
    return loaded;
}

json gate_summary(const Problem& prob) {
    const GateParams gp = prob.gate_params();
    json out;
    out["kappa"] = prob.driver.kappa;
    switch (prob.regime) {
        case ProblemRegime::Lipschitz: {
            const GateReport gate = lipschitz_gate(gp);
            out["regime"] = "lipschitz";
            out["gate_value"] = gate.value;
            out["accept"] = gate.accept;
            if (!gate.accept)
                throw GateError("Lipschitz gate rejected: value " + std::to_string(gate.value) +
                                " >= 1");
            const ContractionWindow w = find_contraction_window(gp);
            out["mu_star"] = w.mu_star;
            out["delta"] = w.delta;
            out["lambda_at_mu_star"] = w.lambda_at_mu_star;
            return out;
        }
        case ProblemRegime::QuadraticBounded: {
            out["regime"] = "quadratic_bounded";
            out["gate_value"] = gp.gamma1 + gp.gamma2;
            const QuadraticWindow w = quadratic_window(gp, QuadRegime::Bounded);
            out["accept"] = true;
            out["window_len"] = w.window_len;
            return out;
        }
        case ProblemRegime::QuadraticUnbounded: {
            out["regime"] = "quadratic_unbounded";
            out["gate_value"] = 4.0 * (gp.gamma1 + gp.gamma2);
            const QuadraticWindow w = quadratic_window(gp, QuadRegime::Unbounded);
            out["accept"] = true;
            out["window_len"] = w.window_len;
            out["nu"] = w.nu;
            out["nu_tilde"] = w.nu_tilde;
            return out;
        }
    }
    throw ContractError("gate_summary: unreachable");
}

std::string format17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string solution_csv(const Lattice& lat, const SolutionTriple& triple) {
    std::string out = "level,node,t,b,y,z,k\n";
    const int n = lat.grid().n_steps;
    for (int i = 0; i <= n; ++i) {
        const auto b = lat.values(i);
        for (int j = 0; j <= i; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            out += std::to_string(i);
            out += ',';
            out += std::to_string(j);
            out += ',';
            out += format17(lat.grid().time_at(i));
            out += ',';
            out += format17(b[ju]);
            out += ',';
            out += format17(triple.y[i][ju]);
            out += ',';
            if (i < n) out += format17(triple.z[i][ju]);
            out += ',';
            out += format17(triple.k[i][ju]);
            out += '\n';
        }
    }
    return out;
}

namespace {

json iteration_report_json(const IterationReport& rep) {
    json out;
    out["converged"] = rep.converged;
    out["total_iterations"] = rep.total_iterations;
    out["contraction_bound"] = rep.contraction_bound;
    out["window_length"] = rep.window_length;
    json windows = json::array();
    for (const auto& w : rep.windows) {
        json jw;
        jw["left_level"] = w.left_level;
        jw["right_level"] = w.right_level;
        jw["iterations"] = w.iterations;
        jw["diffs"] = w.diffs;
        jw["ratios"] = w.ratios;
        windows.push_back(std::move(jw));
    }
    out["windows"] = std::move(windows);
    return out;
}

}  // namespace

json RunResult::to_json() const {
    json out;
    out["y0"] = y0;
    out["y_sup"] = y_sup;
    out["y_inf"] = y_inf;
    out["k_terminal_mean"] = k_terminal_mean;
    out["bmo_norm"] = bmo;
    out["skorokhod_residual"] = skorokhod;
    out["gate"] = gate;
    out["iterations"] = iteration_report_json(iterations);
    out["wall_ms"] = wall_ms;
    return out;
}

std::pair<SolutionTriple, RunResult> run_solve(const Problem& prob) {
    RunResult result;
    result.gate = gate_summary(prob);  // throws GateError (exit 2) on reject

    const Lattice lat = make_lattice(prob);
    const auto start = std::chrono::steady_clock::now();
    std::pair<SolutionTriple, IterationReport> solved =
        prob.regime == ProblemRegime::QuadraticUnbounded
            ? theta_sequence_solve(prob, lat, prob.solver)
            : picard_solve(prob, lat, prob.solver);
    const auto stop = std::chrono::steady_clock::now();

    SolutionTriple& triple = solved.first;
    result.iterations = solved.second;
    result.wall_ms = std::chrono::duration<double, std::milli>(stop - start).count();

    result.y0 = triple.y[0][0];
    result.y_sup = -std::numeric_limits<double>::infinity();
    result.y_inf = std::numeric_limits<double>::infinity();
    for (const auto& level : triple.y.levels) {
        for (const double v : level) {
            result.y_sup = std::max(result.y_sup, v);
            result.y_inf = std::min(result.y_inf, v);
        }
    }
    const int n = lat.grid().n_steps;
    const auto probs = lat.probs(n);
    result.k_terminal_mean = 0.0;
    for (int j = 0; j <= n; ++j)
        result.k_terminal_mean += probs[static_cast<std::size_t>(j)] *
                                  triple.k[n][static_cast<std::size_t>(j)];
    result.bmo = bmo_norm(lat, triple.z);
    result.skorokhod = skorokhod_residual(lat, triple, triple.obstacle);
    log_info("solve: Y0 = " + format17(result.y0) + ", iterations = " +
             std::to_string(result.iterations.total_iterations));
    for (const auto& w : result.iterations.windows)
        log_debug("window [" + std::to_string(w.left_level) + ", " +
                  std::to_string(w.right_level) + "]: " + std::to_string(w.iterations) +
                  " iterations, last diff " +
                  (w.diffs.empty() ? std::string("n/a") : format17(w.diffs.back())));
    return {std::move(triple), std::move(result)};
}

namespace {

// Cole-Hopf instance: f = (gamma/2) z^2, xi = b. The lattice log-expectation
// (1/gamma) log sum p_j exp(gamma xi_j) is the independent oracle; the
// continuum value is gamma T / 2.
double colehopf_solver_value(int steps) {
    const Lattice lat = Lattice::build(1.0, steps);
    DriverSpec driver;
    driver.expr = Expr::binary(BinaryOp::Mul, Expr::literal(0.5),
                               Expr::unary(UnaryOp::Sq, Expr::variable(Variable::Z)));
    driver.gamma = 1.0;
    driver.regime = DriverRegime::Quadratic;
    FrozenInputs frozen;
    frozen.laws.assign(static_cast<std::size_t>(lat.levels()), MarginalLaw::dirac(0.0));
    TerminalCondition terminal{Expr::variable(Variable::B)};
    return solve_bsde(lat, driver, frozen, terminal).y[0][0];
}

double colehopf_lattice_oracle(int steps) {
    const Lattice lat = Lattice::build(1.0, steps);
    const auto b = lat.values(steps);
    const auto p = lat.probs(steps);
    double sum = 0.0;
    for (std::size_t j = 0; j < b.size(); ++j) sum += p[j] * std::exp(b[j]);
    return std::log(sum);
}

Problem meanfield_linear_problem(int steps) {
    json config = {
        {"schema_version", 1},
        {"T", 1.0},
        {"n_steps", steps},
        {"p_exponent", 2.0},
        {"regime", "lipschitz"},
        {"terminal", {{"expr", "1"}}},
        {"driver", {{"expr", "0.5*m1"}, {"lambda", 0.5}}},
        {"obstacle", {{"expr", "-1000000"}, {"gamma1", 0.0}, {"gamma2", 0.0}}},
        {"solver", {{"tol", 1e-9}, {"max_iter", 50}}},
    };
    return problem_from_json(config);
}

}  // namespace

std::vector<OracleRow> run_oracle(const std::string& case_name, int depth, int steps) {
    std::vector<OracleRow> rows;
    if (case_name == "snell") {
        if (depth < 1 || depth > 4) throw ConfigError("oracle snell: depth must be in [1, 4]");
        battery::Rng rng(20240 + static_cast<std::uint64_t>(depth));
        const int count = 50;
        for (int k = 0; k < count; ++k) {
            const auto inst = battery::make_snell_instance(depth, rng);
            const auto xi = inst.terminal.realize(inst.lat);
            const double dp = solve_reflected_range(inst.lat, inst.driver, inst.frozen,
                                                    inst.obstacle, xi, 0, depth)
                                  .y[0][0];
            const double oracle = snell_bruteforce(inst.lat, inst.driver, inst.frozen,
                                                   inst.terminal, inst.obstacle);
            OracleRow row;
            row.label = "snell[" + std::to_string(depth) + "]#" + std::to_string(k);
            row.solver = dp;
            row.oracle = oracle;
            row.gap = std::fabs(dp - oracle);
            row.tolerance = 1e-12;
            row.pass = row.gap <= row.tolerance;
            rows.push_back(std::move(row));
        }
        return rows;
    }
    if (case_name == "colehopf") {
        const int n = steps > 0 ? steps : 64;
        const double solver = colehopf_solver_value(n);
        OracleRow continuum{"colehopf_continuum", solver, 0.5, std::fabs(solver - 0.5), 5e-2,
                            false};
        continuum.pass = continuum.gap <= continuum.tolerance;
        rows.push_back(continuum);
        const double lattice_oracle = colehopf_lattice_oracle(n);
        OracleRow fine{"colehopf_lattice", solver, lattice_oracle,
                       std::fabs(solver - lattice_oracle), 5e-2, false};
        fine.pass = fine.gap <= fine.tolerance;
        rows.push_back(fine);
        return rows;
    }
    if (case_name == "meanfield_linear") {
        const int n = steps > 0 ? steps : 128;
        const Problem prob = meanfield_linear_problem(n);
        const Lattice lat = make_lattice(prob);
        const double y0 = picard_solve(prob, lat, prob.solver).first.y[0][0];
        OracleRow row{"meanfield_linear", y0, std::exp(0.5), std::fabs(y0 - std::exp(0.5)),
                      5e-3, false};
        row.pass = row.gap <= row.tolerance;
        rows.push_back(row);
        return rows;
    }
    throw ConfigError("unknown oracle case '" + case_name +
                      "' (expected snell, colehopf or meanfield_linear)");
}

std::vector<StudyRow> run_study(const Problem& prob, const std::vector<int>& steps) {
    if (steps.empty()) throw ConfigError("study: empty steps list");
    std::vector<StudyRow> rows;
    for (const int n : steps) {
        Problem variant = prob;
        variant.n_steps = n;
        const Lattice lat = make_lattice(variant);
        validate_terminal_compatibility(variant, lat);
        const auto [triple, result] = run_solve(variant);
        StudyRow row;
        row.n = n;
        row.y0 = triple.y[0][0];
        row.iterations = result.iterations.total_iterations;
        rows.push_back(row);
    }
    const double finest = rows.back().y0;
    for (auto& row : rows) row.diff_to_finest = std::fabs(row.y0 - finest);
    // Successive-difference ratios: d_k = |y0(n_k) - y0(n_{k-1})|, ratio =
    // d_k / d_{k-1}. For a first-order scheme on doubling grids this sits at
    // 1/2; the observed order is log2(1/ratio).
    for (std::size_t k = 2; k < rows.size(); ++k) {
        const double d_prev = std::fabs(rows[k - 1].y0 - rows[k - 2].y0);
        const double d_cur = std::fabs(rows[k].y0 - rows[k - 1].y0);
        if (d_prev > 0.0) {
            rows[k].ratio = d_cur / d_prev;
            rows[k].has_ratio = true;
        }
    }
    return rows;
}

std::string study_csv(const std::vector<StudyRow>& rows) {
    std::string out = "n,y0,diff_to_finest,iterations,ratio\n";
    for (const auto& row : rows) {
        out += std::to_string(row.n);
        out += ',';
        out += format17(row.y0);
        out += ',';
        out += format17(row.diff_to_finest);
        out += ',';
        out += std::to_string(row.iterations);
        out += ',';
        if (row.has_ratio) out += format17(row.ratio);
        out += '\n';
    }
    return out;
}

}  // namespace mfrbsde::harness
