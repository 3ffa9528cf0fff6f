#pragma once

#include <string>
#include <vector>

#include "mfrbsde/bsde.hpp"
#include "mfrbsde/rbsde.hpp"

namespace mfrbsde {

struct GateParams {
    double gamma1 = 0.0;
    double gamma2 = 0.0;
    double lambda = 0.0;  // driver Lipschitz constant (lambda or beta, per regime)
    double beta = 0.0;    // quadratic growth in |y| + W1
    double alpha = 0.0;
    double gamma = 0.0;   // quadratic growth in |z|^2 (coefficient gamma/2)
    double p_exponent = 2.0;
    double horizon = 0.0;
};

struct GateReport {
    bool accept = false;
    double value = 0.0;
};

// Lipschitz gate: (g1+g2)^((p-1)/p) * ((p/(p-1))^p g1 + g2)^(1/p) < 1.
// Reduces to gamma2 when gamma1 = 0.
GateReport lipschitz_gate(const GateParams& gp);

// Contraction factor of the solution map on a terminal window of length
// (mu-1)^2, for mu in (1, p).
double lambda_mu(const GateParams& gp, double mu);

struct ContractionWindow {
    double mu_star = 0.0;            // in (1, p)
    double delta = 0.0;              // window length, min((mu*-1)^2, T)
    double lambda_at_mu_star = 0.0;  // < 1
};

// Largest mu with lambda_mu(mu) <= 1 - margin, bisected to 1e-10.
ContractionWindow find_contraction_window(const GateParams& gp, double margin = 0.05);

enum class QuadRegime { Bounded, Unbounded };

struct QuadraticWindow {
    double window_len = 0.0;
    double nu = 0.0;        // unbounded regime only
    double nu_tilde = 0.0;  // unbounded regime only
};

// Both left-hand sides of the unbounded window inequalities
//   4 e^(beta h) nu~ (g1 + g2 + beta h) < 1   and   4 e^(beta h) nu nu~ g1 < 1.
std::pair<double, double> unbounded_window_lhs(const GateParams& gp, double h, double nu,
                                               double nu_tilde);

// Bounded: window = half the slack of gamma1+gamma2+2*beta*h < 1 (T if beta=0).
// Unbounded: nu = nu~ = 1 + slack/4 with slack = 1 - 4(g1+g2), then the largest
// h keeping both inequalities below a 0.99 safety level.
QuadraticWindow quadratic_window(const GateParams& gp, QuadRegime regime);

// Discrete BMO norm: max over all nodes of E_node[sum_{s>=level} z_s^2 dt],
// square-rooted; one backward sweep.
double bmo_norm(const Lattice& lat, const NodeProcess& z);

struct BmoBoundReport {
    double lhs = 0.0;  // bmo_norm(z)^2
    double rhs = 0.0;  // (1 + 2 gamma T (alpha + beta ||Y||oo)) e^(4 gamma ||Y||oo) / gamma^2
    bool pass = false;
};

// Checks lhs <= 1.10 * rhs (discretization slack). gamma must be positive.
BmoBoundReport bmo_bound_check(const Lattice& lat, const SolutionTriple& triple,
                               const GateParams& gp);

enum class ExpMomentVariant { Abs, Plus };

struct ExpMomentReport {
    double max_violation = 0.0;  // max over nodes of (lhs - rhs)/rhs
    bool pass = false;           // max_violation <= 0.02
};

// Exponential-moment inequality: exp(p gamma |y_t|) (or positive part) against
// E_t[exp(p gamma e^(beta(T-t)) |eta| + p gamma Integral(alpha e^(beta(s-t))))]
// with constant alpha; evaluated at every node.
ExpMomentReport exp_moment_check(const Lattice& lat, const BsdePair& pair, const GateParams& gp,
                                 double p, ExpMomentVariant variant);

struct ProbeFlag {
    std::string slot;      // which argument was perturbed
    double at = 0.0;       // perturbed coordinate value
    double quotient = 0.0;
    double declared = 0.0;
};

struct ProbeReport {
    std::vector<ProbeFlag> flags;

    bool clean() const { return flags.empty(); }
};

// Finite-difference sanity probe over a deterministic grid; flags quotients
// exceeding the declared constant by more than 1%. Report only, never throws.
// For quadratic drivers the z slot is skipped (growth, not Lipschitz).
ProbeReport lipschitz_probe(const DriverSpec& driver, int sample_count);
ProbeReport lipschitz_probe(const ObstacleSpec& obstacle, int sample_count);

}  // namespace mfrbsde
