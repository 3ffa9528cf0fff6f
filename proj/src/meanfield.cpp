#include "mfrbsde/meanfield.hpp"

#include <cmath>
#include <string>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

GateParams Problem::gate_params() const {
    GateParams gp;
    gp.gamma1 = obstacle.gamma1;
    gp.gamma2 = obstacle.gamma2;
    gp.lambda = driver.lambda;
    gp.alpha = driver.alpha;
    gp.beta = driver.beta;
    gp.gamma = driver.gamma;
    gp.p_exponent = p_exponent;
    gp.horizon = horizon;
    return gp;
}

Lattice make_lattice(const Problem& prob) { return Lattice::build(prob.horizon, prob.n_steps); }

void validate_terminal_compatibility(const Problem& prob, const Lattice& lat) {
    const int n = lat.grid().n_steps;
    const auto xi = prob.terminal.realize(lat);
    const MarginalLaw law = lat.node_marginal(n, xi);
    double worst = 0.0;
    int worst_node = -1;
    for (std::size_t j = 0; j < xi.size(); ++j) {
        const double h = prob.obstacle.eval(prob.horizon, xi[j], law);
        if (h - xi[j] > worst) {
            worst = h - xi[j];
            worst_node = static_cast<int>(j);
        }
    }
    if (worst_node >= 0)
        throw ConfigError("terminal compatibility violated: h(T, xi, P_xi) exceeds xi by " +
                          std::to_string(worst) + " at terminal node " +
                          std::to_string(worst_node));
}

namespace {

std::vector<MarginalLaw> laws_from(const Lattice& lat, const NodeProcess& U, int left, int right) {
    std::vector<MarginalLaw> laws(static_cast<std::size_t>(lat.levels()), MarginalLaw::dirac(0.0));
    for (int i = left; i <= right; ++i)
        laws[static_cast<std::size_t>(i)] = lat.node_marginal(i, U[i]);
    return laws;
}

NodeProcess obstacle_process_from(const Lattice& lat, const ObstacleSpec& obstacle,
                                  const NodeProcess& U, const std::vector<MarginalLaw>& laws,
                                  int left, int right) {
    NodeProcess H = lat.make_process();
    for (int i = left; i <= right; ++i) {
        const double t = lat.grid().time_at(i);
        const MarginalLaw& law = laws[static_cast<std::size_t>(i)];
        for (int j = 0; j <= i; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            H[i][ju] = obstacle.eval(t, U[i][ju], law);
        }
    }
    return H;
}

SolutionTriple apply_gamma_range(const Problem& prob, const Lattice& lat, const NodeProcess& U,
                                 FreezeMode mode, std::span<const double> terminal_slice,
                                 int left, int right, double compat_tol = 0.0) {
    const auto laws = laws_from(lat, U, left, right);
    const NodeProcess H = obstacle_process_from(lat, prob.obstacle, U, laws, left, right);
    FrozenInputs frozen;
    frozen.laws = laws;
    if (mode == FreezeMode::Full) frozen.frozen_y = U;
    return solve_reflected_range(lat, prob.driver, frozen, H, terminal_slice, left, right,
                                 compat_tol);
}

double sup_diff_range(const NodeProcess& a, const NodeProcess& b, int left, int right) {
    double m = 0.0;
    for (int i = left; i <= right; ++i) {
        for (std::size_t j = 0; j < a[i].size(); ++j) {
            const double d = std::fabs(a[i][j] - b[i][j]);
            if (d > m) m = d;
        }
    }
    return m;
}

// Successive-difference stopping rule: accept once the last difference is
// below tol/2 and the projected distance to the fixed point (geometric-ratio
// estimate) is below tol/4, so the returned iterate certifies a residual
// within 2*tol even after cross-window propagation.
bool iteration_converged(const std::vector<double>& diffs, double tol) {
    const double d = diffs.back();
    if (d == 0.0) return true;
    if (!(d <= 0.5 * tol)) return false;
    double rhat = 0.9;
    if (diffs.size() >= 2 && diffs[diffs.size() - 2] > 1e-300) {
        rhat = d / diffs[diffs.size() - 2];
        if (rhat > 0.95) rhat = 0.95;
    }
    return d * rhat / (1.0 - rhat) <= 0.25 * tol;
}

void record_ratios(IterationReport::Window& w) {
    w.ratios.clear();
    for (std::size_t k = 1; k < w.diffs.size(); ++k)
        if (w.diffs[k - 1] > 1e-14) w.ratios.push_back(w.diffs[k] / w.diffs[k - 1]);
}

NodeProcess initial_iterate(const Lattice& lat, std::span<const double> terminal_slice, int left,
                            int right) {
    NodeProcess U = lat.make_process();
    U[right].assign(terminal_slice.begin(), terminal_slice.end());
    for (int i = right - 1; i >= left; --i) U[i] = lat.conditional_expectation(i, U[i + 1]);
    return U;
}

}  // namespace

SolutionTriple gamma_map(const Problem& prob, const Lattice& lat, const NodeProcess& U,
                         FreezeMode mode) {
    const int n = lat.grid().n_steps;
    const auto xi = prob.terminal.realize(lat);
    double mismatch = 0.0;
    for (std::size_t j = 0; j < xi.size(); ++j)
        mismatch = std::max(mismatch, std::fabs(U[n][j] - xi[j]));
    if (mismatch > 1e-12)
        throw ContractError("gamma_map: U at the terminal level differs from xi by " +
                            std::to_string(mismatch));
    return apply_gamma_range(prob, lat, U, mode, xi, 0, n);
}

std::pair<SolutionTriple, IterationReport> picard_solve(const Problem& prob, const Lattice& lat,
                                                        const SolverOptions& opts) {
    const int n = lat.grid().n_steps;
    const double dt = lat.grid().dt;
    const GateParams gp = prob.gate_params();

    IterationReport report;
    double window_len = 0.0;
    switch (prob.regime) {
        case ProblemRegime::Lipschitz: {
            const ContractionWindow w = find_contraction_window(gp);
            window_len = w.delta;
            report.contraction_bound = w.lambda_at_mu_star;
            break;
        }
        case ProblemRegime::QuadraticBounded: {
            const QuadraticWindow w = quadratic_window(gp, QuadRegime::Bounded);
            window_len = w.window_len;
            report.contraction_bound = gp.gamma1 + gp.gamma2 + 2.0 * gp.beta * w.window_len;
            break;
        }
        case ProblemRegime::QuadraticUnbounded:
            throw ConfigError("picard_solve: unbounded regime is handled by theta_sequence_solve");
    }
    if (opts.window_override) {
        if (!(*opts.window_override > 0.0))
            throw ConfigError("picard_solve: window_override must be positive");
        window_len = *opts.window_override;
    }

    const int window_steps = static_cast<int>(std::floor(window_len / dt + 1e-12));
    if (window_steps < 1)
        throw ConfigError("picard_solve: contraction window " + std::to_string(window_len) +
                          " is shorter than one grid step dt = " + std::to_string(dt) +
                          "; refine the grid (larger n_steps)");
    report.window_length = window_steps * dt;

    SolutionTriple global;
    global.y = lat.make_process();
    global.z = lat.make_process();
    global.dk = lat.make_process();
    global.obstacle = lat.make_process();
    std::vector<double> terminal_slice = prob.terminal.realize(lat);
    global.y[n] = terminal_slice;

    int right = n;
    while (right > 0) {
        const int left = std::max(0, right - window_steps);
        IterationReport::Window wrep;
        wrep.left_level = left;
        wrep.right_level = right;

        NodeProcess U = initial_iterate(lat, terminal_slice, left, right);
        SolutionTriple triple;
        bool window_converged = false;
        // Interior windows inherit converged (not exact) terminal data.
        const double compat_tol = right == n ? 0.0 : 100.0 * opts.tol;
        for (int k = 1; k <= opts.max_iter; ++k) {
            triple = apply_gamma_range(prob, lat, U, FreezeMode::Full, terminal_slice, left, right,
                                       compat_tol);
            const double d = sup_diff_range(triple.y, U, left, right);
            wrep.diffs.push_back(d);
            wrep.iterations = k;
            for (int i = left; i <= right; ++i) U[i] = triple.y[i];
            if (iteration_converged(wrep.diffs, opts.tol)) {
                window_converged = true;
                break;
            }
        }
        record_ratios(wrep);
        report.total_iterations += wrep.iterations;
        report.windows.push_back(std::move(wrep));

        if (!window_converged) {
            report.converged = false;
            throw SolveFailure("picard_solve: window [" + std::to_string(left) + ", " +
                                   std::to_string(right) + "] did not converge in " +
                                   std::to_string(opts.max_iter) + " iterations",
                               std::move(report));
        }

        for (int i = left; i <= right; ++i) global.y[i] = triple.y[i];
        // Level `right` of an interior window is the previous window's left
        // edge; its obstacle slice (and dk) belong to that window.
        if (right == n) global.obstacle[n] = triple.obstacle[n];
        for (int i = left; i < right; ++i) {
            global.z[i] = triple.z[i];
            global.dk[i] = triple.dk[i];
            global.obstacle[i] = triple.obstacle[i];
        }
        terminal_slice = triple.y[left];
        right = left;
    }

    accumulate_k(lat, global);
    report.converged = true;
    return {std::move(global), std::move(report)};
}

std::pair<SolutionTriple, IterationReport> theta_sequence_solve(const Problem& prob,
                                                                const Lattice& lat,
                                                                const SolverOptions& opts) {
    if (prob.regime != ProblemRegime::QuadraticUnbounded)
        throw ConfigError("theta_sequence_solve: regime must be quadratic_unbounded");
    if (prob.driver.convexity == Convexity::None)
        throw GateError("theta_sequence_solve: driver must be declared concave or convex");
    const GateParams gp = prob.gate_params();
    const QuadraticWindow cert = quadratic_window(gp, QuadRegime::Unbounded);  // gate + certificates

    const int n = lat.grid().n_steps;
    const auto xi = prob.terminal.realize(lat);

    IterationReport report;
    report.contraction_bound = 4.0 * (gp.gamma1 + gp.gamma2);
    report.window_length = cert.window_len;
    IterationReport::Window wrep;
    wrep.left_level = 0;
    wrep.right_level = n;

    NodeProcess U = lat.conditional_expectation_process(xi);  // Y^(0) = E_t[xi]
    SolutionTriple triple;
    bool converged = false;
    for (int m = 1; m <= opts.m_max; ++m) {
        triple = apply_gamma_range(prob, lat, U, FreezeMode::LawOnly, xi, 0, n);
        const double d = sup_abs_diff(triple.y, U);
        wrep.diffs.push_back(d);
        wrep.iterations = m;
        U = triple.y;
        if (iteration_converged(wrep.diffs, opts.tol)) {
            converged = true;
            break;
        }
    }
    record_ratios(wrep);
    report.total_iterations = wrep.iterations;
    report.windows.push_back(std::move(wrep));
    report.converged = converged;

    if (!converged)
        throw SolveFailure("theta_sequence_solve: differences did not reach tol within m_max = " +
                               std::to_string(opts.m_max),
                           std::move(report));
    return {std::move(triple), std::move(report)};
}

ResidualReport fixed_point_residual(const Problem& prob, const Lattice& lat, const NodeProcess& Y,
                                    FreezeMode mode) {
    const SolutionTriple mapped = gamma_map(prob, lat, Y, mode);
    ResidualReport rep;
    for (int i = 0; i < lat.levels(); ++i) {
        const auto probs = lat.probs(i);
        double weighted = 0.0;
        for (std::size_t j = 0; j < Y[i].size(); ++j) {
            const double d = std::fabs(mapped.y[i][j] - Y[i][j]);
            rep.sup_abs = std::max(rep.sup_abs, d);
            weighted += probs[j] * d;
        }
        rep.weighted = std::max(rep.weighted, weighted);
    }
    return rep;
}

}  // namespace mfrbsde
