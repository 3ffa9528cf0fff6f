#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mfrbsde/errors.hpp"
#include "mfrbsde/harness.hpp"

namespace {

using namespace mfrbsde;
namespace hn = mfrbsde::harness;

std::vector<int> parse_steps_list(const std::string& csv) {
    std::vector<int> steps;
    std::stringstream ss(csv);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            steps.push_back(std::stoi(item));
        } catch (const std::exception&) {
            throw ConfigError("--steps: '" + item + "' is not an integer");
        }
        if (steps.back() < 1) throw ConfigError("--steps: values must be positive");
    }
    if (steps.empty()) throw ConfigError("--steps: empty list");
    return steps;
}

void write_file(const std::string& path, const std::string& bytes) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("cannot open output file '" + path + "'");
    out << bytes;
}

int cmd_check(const std::string& config_path) {
    const hn::LoadedProblem loaded = hn::load_problem(config_path);
    for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    nlohmann::json out;
    out["config"] = config_path;
    out["gate"] = hn::gate_summary(loaded.problem);
    out["warnings"] = loaded.warnings;
    std::cout << out.dump(2) << "\n";
    return hn::kExitOk;
}

int cmd_solve(const std::string& config_path, int steps_override, const std::string& out_csv) {
    hn::LoadedProblem loaded = hn::load_problem(config_path);
    for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << "\n";
    if (steps_override > 0) {
        loaded.problem.n_steps = steps_override;
        validate_terminal_compatibility(loaded.problem, make_lattice(loaded.problem));
    }
    try {
        const auto [triple, result] = hn::run_solve(loaded.problem);
        if (!out_csv.empty())
            write_file(out_csv, hn::solution_csv(make_lattice(loaded.problem), triple));
        std::cout << result.to_json().dump(2) << "\n";
        return hn::kExitOk;
    } catch (const SolveFailure& e) {
        nlohmann::json out;
        out["error"] = e.what();
        out["converged"] = false;
        nlohmann::json windows = nlohmann::json::array();
        for (const auto& w : e.report.windows)
            windows.push_back({{"left_level", w.left_level},
                               {"right_level", w.right_level},
                               {"iterations", w.iterations},
                               {"diffs", w.diffs}});
        out["windows"] = windows;
        std::cout << out.dump(2) << "\n";
        return hn::kExitNonConvergence;
    }
}

int cmd_oracle(const std::string& case_name, int depth, int steps) {
    const auto rows = hn::run_oracle(case_name, depth, steps);
    double max_gap = 0.0;
    bool all_pass = true;
    std::printf("%-24s %22s %22s %12s %10s %s\n", "case", "solver", "oracle", "gap", "tol",
                "status");
    for (const auto& row : rows) {
        std::printf("%-24s %22.15g %22.15g %12.3e %10.1e %s\n", row.label.c_str(), row.solver,
                    row.oracle, row.gap, row.tolerance, row.pass ? "PASS" : "FAIL");
        max_gap = std::max(max_gap, row.gap);
        all_pass = all_pass && row.pass;
    }
    std::printf("max gap %.3e over %zu comparisons\n", max_gap, rows.size());
    return all_pass ? hn::kExitOk : hn::kExitNonConvergence;
}

int cmd_study(const std::string& config_path, const std::string& steps_csv,
              const std::string& out_csv) {
    const hn::LoadedProblem loaded = hn::load_problem(config_path);
    const auto rows = hn::run_study(loaded.problem, parse_steps_list(steps_csv));
    const std::string csv = hn::study_csv(rows);
    if (!out_csv.empty()) write_file(out_csv, csv);
    else std::cout << csv;
    return hn::kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Deterministic lattice solver for mean-field reflected BSDEs"};
    app.require_subcommand(1);

    std::string config_path, out_csv, oracle_case, steps_csv;
    int steps_override = 0, oracle_depth = 3, oracle_steps = 0;

    CLI::App* check = app.add_subcommand("check", "validate a config and print the gate report");
    check->add_option("--config", config_path, "problem config (JSON)")->required();

    CLI::App* solve = app.add_subcommand("solve", "solve a problem and emit CSV/JSON results");
    solve->add_option("--config", config_path, "problem config (JSON)")->required();
    solve->add_option("--steps", steps_override, "override n_steps");
    solve->add_option("--out", out_csv, "write per-node results CSV here");

    CLI::App* oracle = app.add_subcommand("oracle", "compare the solver against an oracle");
    oracle->add_option("--case", oracle_case, "snell | colehopf | meanfield_linear")->required();
    oracle->add_option("--depth", oracle_depth, "snell tree depth (<= 4)");
    oracle->add_option("--steps", oracle_steps, "lattice steps for colehopf/meanfield_linear");

    CLI::App* study = app.add_subcommand("study", "convergence study over a list of n values");
    study->add_option("--config", config_path, "problem config (JSON)")->required();
    study->add_option("--steps", steps_csv, "comma-separated n values")->required();
    study->add_option("--out", out_csv, "write study CSV here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : mfrbsde::harness::kExitConfigError;
    }

    try {
        if (check->parsed()) return cmd_check(config_path);
        if (solve->parsed()) return cmd_solve(config_path, steps_override, out_csv);
        if (oracle->parsed()) return cmd_oracle(oracle_case, oracle_depth, oracle_steps);
        if (study->parsed()) return cmd_study(config_path, steps_csv, out_csv);
    } catch (const mfrbsde::GateError& e) {
        std::cerr << "gate failure: " << e.what() << "\n";
        return mfrbsde::harness::kExitGateFailure;
    } catch (const mfrbsde::SolveFailure& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return mfrbsde::harness::kExitNonConvergence;
    } catch (const mfrbsde::NonConvergenceError& e) {
        std::cerr << "non-convergence: " << e.what() << "\n";
        return mfrbsde::harness::kExitNonConvergence;
    } catch (const mfrbsde::NumericError& e) {
        std::cerr << "numeric failure: " << e.what() << "\n";
        return mfrbsde::harness::kExitNonConvergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return mfrbsde::harness::kExitConfigError;
    }
    return mfrbsde::harness::kExitConfigError;
}
