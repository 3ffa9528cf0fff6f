#pragma once

#include <optional>
#include <vector>

#include "mfrbsde/expr.hpp"
#include "mfrbsde/lattice.hpp"
#include "mfrbsde/marginal_law.hpp"

namespace mfrbsde {

enum class Convexity { None, Concave, Convex };
enum class DriverRegime { Lipschitz, Quadratic };

// Driver f(t, y, nu, z) with user-declared constants. lambda is the Lipschitz
// constant in (y, law, z); alpha/beta/gamma are the quadratic growth envelope
// |f| <= alpha + beta(|y| + W1(nu, delta_0)) + (gamma/2)|z|^2. kappa (local
// z-Lipschitz) has no computational consumer and is carried for reporting.
struct DriverSpec {
    Expr expr;  // in t, y, z, m1, am
    double lambda = 0.0;
    double alpha = 0.0;
    double beta = 0.0;
    double gamma = 0.0;
    double kappa = 0.0;
    Convexity convexity = Convexity::None;
    DriverRegime regime = DriverRegime::Lipschitz;

    double eval(double t, double y, double z, const MarginalLaw& law) const {
        return expr.eval(EvalEnv{t, y, z, 0.0, law.mean(), law.abs_mean()});
    }
};

struct TerminalCondition {
    Expr expr;  // in b only

    // Evaluates on the terminal level; throws on non-finite values.
    std::vector<double> realize(const Lattice& lat) const;
};

struct BsdePair {
    NodeProcess y;  // levels 0..n
    NodeProcess z;  // levels 0..n-1
};

// Frozen mean-field data for one solve. Laws are per level; when frozen_y is
// present the driver's y-slot reads it (freeze-full mode), otherwise y is the
// solver unknown and each node solves an implicit scalar equation.
struct FrozenInputs {
    std::vector<MarginalLaw> laws;
    std::optional<NodeProcess> frozen_y;

    const MarginalLaw& law_at(int level) const { return laws[static_cast<std::size_t>(level)]; }
};

// One backward node update: solves  y = expectation + f(t, y_hat, law, z)*dt
// with y_hat = frozen value if supplied, else the implicit unknown (damped
// fixed-point iteration to residual <= 1e-13; requires lambda*dt < 1).
double backward_node_step(const DriverSpec& driver, double t, double dt,
                          double expectation, double z, const MarginalLaw& law,
                          const double* frozen_y_value);

void check_step_size(const DriverSpec& driver, const TimeGrid& grid);

// Backward-induction solve on levels [left_level, right_level] with the given
// terminal slice at right_level. Levels outside the range are left zero.
BsdePair solve_bsde_range(const Lattice& lat, const DriverSpec& driver,
                          const FrozenInputs& frozen,
                          std::span<const double> terminal_at_right,
                          int left_level, int right_level);

BsdePair solve_bsde(const Lattice& lat, const DriverSpec& driver, const FrozenInputs& frozen,
                    const TerminalCondition& terminal);

}  // namespace mfrbsde
