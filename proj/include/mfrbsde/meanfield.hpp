#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "mfrbsde/analysis.hpp"
#include "mfrbsde/errors.hpp"
#include "mfrbsde/rbsde.hpp"

namespace mfrbsde {

enum class ProblemRegime { Lipschitz, QuadraticBounded, QuadraticUnbounded };

struct SolverOptions {
    double tol = 1e-9;
    int max_iter = 50;                     // Picard iterations per window
    int m_max = 60;                        // theta-recursion length cap
    std::optional<double> window_override; // window length in time units
};

struct Problem {
    double horizon = 0.0;
    int n_steps = 0;
    TerminalCondition terminal;
    DriverSpec driver;
    ObstacleSpec obstacle;
    ProblemRegime regime = ProblemRegime::Lipschitz;
    double p_exponent = 2.0;
    SolverOptions solver;

    GateParams gate_params() const;
};

Lattice make_lattice(const Problem& prob);

// Terminal compatibility xi >= h(T, xi, P_xi) nodewise; throws ConfigError
// naming the worst node.
void validate_terminal_compatibility(const Problem& prob, const Lattice& lat);

// Solution-map modes. Full freezes the driver's y-slot and the law at U
// (driver f(t, U_t, P_U, z), obstacle h(t, U_t, P_U)); LawOnly keeps y as the
// solver unknown and freezes only the law in the driver, with the obstacle
// still frozen at (U, P_U).
enum class FreezeMode { Full, LawOnly };

SolutionTriple gamma_map(const Problem& prob, const Lattice& lat, const NodeProcess& U,
                         FreezeMode mode);

struct IterationReport {
    struct Window {
        int left_level = 0;
        int right_level = 0;
        int iterations = 0;
        std::vector<double> diffs;   // sup-norm successive differences
        std::vector<double> ratios;  // diffs[k]/diffs[k-1] when denominator > 1e-14
    };
    std::vector<Window> windows;
    double contraction_bound = 0.0;  // Lambda(mu*), gamma1+gamma2+2*beta*h, or 4(g1+g2)
    double window_length = 0.0;      // grid-aligned window (Picard) or certified h (theta)
    bool converged = false;
    int total_iterations = 0;
};

struct SolveFailure : NonConvergenceError {
    IterationReport report;
    SolveFailure(const std::string& msg, IterationReport rep)
        : NonConvergenceError(msg), report(std::move(rep)) {}
};

// Picard iteration of the solution map in Full mode on contraction windows
// aligned to grid points, stitched backward from the terminal. Handles the
// Lipschitz and bounded-quadratic regimes.
std::pair<SolutionTriple, IterationReport> picard_solve(const Problem& prob, const Lattice& lat,
                                                        const SolverOptions& opts);

// Law-frozen recursion for the unbounded concave/convex regime: Y^0 = E_t[xi],
// Y^m solves the reflected problem with the law and the obstacle's y-argument
// frozen at Y^(m-1).
std::pair<SolutionTriple, IterationReport> theta_sequence_solve(const Problem& prob,
                                                                const Lattice& lat,
                                                                const SolverOptions& opts);

struct ResidualReport {
    double sup_abs = 0.0;   // sup over nodes of |Gamma(Y).y - Y|
    double weighted = 0.0;  // max over levels of the probability-weighted mean
};

ResidualReport fixed_point_residual(const Problem& prob, const Lattice& lat, const NodeProcess& Y,
                                    FreezeMode mode);

}  // namespace mfrbsde
