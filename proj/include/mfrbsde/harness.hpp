#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mfrbsde/meanfield.hpp"

namespace mfrbsde::harness {

// Exit-code contract of the CLI.
inline constexpr int kExitOk = 0;
inline constexpr int kExitGateFailure = 2;
inline constexpr int kExitNonConvergence = 3;
inline constexpr int kExitConfigError = 4;

enum class LogLevel { Quiet = 0, Info = 1, Debug = 2 };

LogLevel log_level();  // from MFRBSDE_LOG in {quiet, info, debug}
void log_info(const std::string& msg);
void log_debug(const std::string& msg);

struct LoadedProblem {
    Problem problem;
    std::vector<std::string> warnings;  // lipschitz_probe flags
};

// Parses and validates the documented JSON schema (schema_version 1); builds
// the lattice once to enforce terminal compatibility. Configuration problems
// throw ConfigError (exit 4).
Problem problem_from_json(const nlohmann::json& config);
LoadedProblem load_problem(const std::string& path);

nlohmann::json gate_summary(const Problem& prob);  // throws GateError on reject

struct RunResult {
    double y0 = 0.0;
    double y_sup = 0.0;
    double y_inf = 0.0;
    double k_terminal_mean = 0.0;
    double bmo = 0.0;
    double skorokhod = 0.0;
    nlohmann::json gate;
    IterationReport iterations;
    double wall_ms = 0.0;

    nlohmann::json to_json() const;
};

std::string format17(double v);

// CSV bytes with columns level,node,t,b,y,z,k; z is empty on the terminal
// level. Deterministic for a fixed config and version.
std::string solution_csv(const Lattice& lat, const SolutionTriple& triple);

// Dispatches on the problem regime (Picard windows or theta recursion).
std::pair<SolutionTriple, RunResult> run_solve(const Problem& prob);

struct OracleRow {
    std::string label;
    double solver = 0.0;
    double oracle = 0.0;
    double gap = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Cases: "snell" (depth <= 4, seeded reflected battery vs exhaustive search),
// "colehopf" (pure quadratic driver vs lattice log-expectation and 1/2),
// "meanfield_linear" (linear law coupling vs e^0.5).
std::vector<OracleRow> run_oracle(const std::string& case_name, int depth, int steps);

struct StudyRow {
    int n = 0;
    double y0 = 0.0;
    double diff_to_finest = 0.0;
    int iterations = 0;
    double ratio = 0.0;
    bool has_ratio = false;
};

std::vector<StudyRow> run_study(const Problem& prob, const std::vector<int>& steps);
std::string study_csv(const std::vector<StudyRow>& rows);

}  // namespace mfrbsde::harness
