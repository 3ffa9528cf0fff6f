#pragma once

#include <optional>

#include "mfrbsde/bsde.hpp"

namespace mfrbsde {

// Obstacle h(t, y, nu) with Lipschitz constants gamma1 (in y) and gamma2
// (in the law, W1 metric). `bound` is the optional uniform bound of the
// bounded-quadratic regime; carried for reporting.
struct ObstacleSpec {
    Expr expr;  // in t, y, m1, am
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    std::optional<double> bound;

    double eval(double t, double y, const MarginalLaw& law) const {
        return expr.eval(EvalEnv{t, y, 0.0, 0.0, law.mean(), law.abs_mean()});
    }
};

// Skorokhod triple on the lattice. dk holds the per-level push increments
// (the path-wise ground truth for monotonicity checks); k is the cumulative
// process recombined by probability-weighted averaging of path increments,
// with k at level 0 equal to 0. obstacle is the frozen obstacle realization
// the scheme reflected on, kept so the flat-off certificate is exact.
struct SolutionTriple {
    NodeProcess y;        // levels 0..n, terminal slice equals xi exactly
    NodeProcess z;        // levels 0..n-1
    NodeProcess dk;       // levels 0..n-1, all entries >= 0
    NodeProcess k;        // levels 0..n, cumulative
    NodeProcess obstacle; // levels 0..n
};

// Discretely reflected backward scheme: per level the unreflected implicit
// step is projected onto the obstacle, y = max(y~, H), and dk = y - y~.
// Requires obstacle_at(right_level) <= terminal nodewise; compat_tol > 0 is
// used by window stitching, where the terminal data is itself a converged
// iterate and satisfies compatibility only up to the iteration tolerance.
SolutionTriple solve_reflected_range(const Lattice& lat, const DriverSpec& driver,
                                     const FrozenInputs& frozen, const NodeProcess& obstacle,
                                     std::span<const double> terminal_at_right,
                                     int left_level, int right_level, double compat_tol = 0.0);

SolutionTriple solve_reflected(const Lattice& lat, const DriverSpec& driver,
                               const FrozenInputs& frozen, const NodeProcess& obstacle,
                               const TerminalCondition& terminal);

// Probability-weighted sum of (y - H) dk over all nodes; zero certifies that
// k pushes only where y sits on the obstacle.
double skorokhod_residual(const Lattice& lat, const SolutionTriple& triple,
                          const NodeProcess& obstacle);

// Rebuilds the cumulative k from dk by forward averaging over incoming paths.
void accumulate_k(const Lattice& lat, SolutionTriple& triple);

}  // namespace mfrbsde
