#include "mfrbsde/battery.hpp"

#include <algorithm>
#include <cmath>

#include "mfrbsde/errors.hpp"

namespace mfrbsde::battery {

namespace {

Expr lit(double v) { return Expr::literal(v); }
Expr var(Variable v) { return Expr::variable(v); }

Expr affine_term(double coeff, Variable v) {
    return Expr::binary(BinaryOp::Mul, lit(coeff), var(v));
}

Expr sum(Expr a, Expr b) { return Expr::binary(BinaryOp::Add, std::move(a), std::move(b)); }

// c0 + c1*min(hi, max(lo, b)): bounded terminal payoffs.
Expr clipped_terminal(double c0, double c1, double lo, double hi) {
    Expr clamp = Expr::binary(BinaryOp::Min, lit(hi),
                              Expr::binary(BinaryOp::Max, lit(lo), var(Variable::B)));
    return sum(lit(c0), Expr::binary(BinaryOp::Mul, lit(c1), std::move(clamp)));
}

// Smallest offset making g1*y + g2*m1 - off compatible with xi at the
// terminal, computed on the realized payoff (the lattice tails reach
// +-sqrt(n), so fixed offsets would violate (B1) at deep nodes).
double compatibility_offset(const Lattice& lat, const TerminalCondition& terminal, double g1,
                            double g2) {
    const auto xi = terminal.realize(lat);
    const MarginalLaw law = lat.node_marginal(lat.grid().n_steps, xi);
    double need = -std::numeric_limits<double>::infinity();
    for (const double v : xi) need = std::max(need, (g1 - 1.0) * v + g2 * law.mean());
    return need;
}

// Obstacle g1*y + g2*m1 + (off+kick)*(1-t) - off: compatible at T by the
// choice of off, and at t = 0 it reduces to g1*y + g2*m1 + kick, which binds
// on the central region so the reflection is genuinely exercised.
ObstacleSpec binding_obstacle(const Lattice& lat, const TerminalCondition& terminal, double g1,
                              double g2, double kick, double margin) {
    const double off = compatibility_offset(lat, terminal, g1, g2) + margin;
    ObstacleSpec h;
    h.expr = sum(sum(affine_term(g1, Variable::Y), affine_term(g2, Variable::M1)),
                 sum(Expr::binary(BinaryOp::Mul, lit(off + kick),
                                  Expr::binary(BinaryOp::Sub, lit(1.0), var(Variable::T))),
                     lit(-off)));
    h.gamma1 = g1;
    h.gamma2 = g2;
    return h;
}

}  // namespace

SnellInstance make_snell_instance(int depth, Rng& rng) {
    SnellInstance inst{Lattice::build(1.0, depth), {}, {}, {}, {}};
    const Lattice& lat = inst.lat;

    // Driver a*y + c*z + d*m1 + e; lambda = max(|a|,|c|,|d|) is truthful for
    // (B2) since |m1(v1) - m1(v2)| <= W1(v1, v2). The budgets keep
    // lambda*sqrt(dt) well under 1 so the backward step stays monotone and
    // the dynamic program coincides with the exhaustive stopping search.
    const double a = rng.uniform(-0.5, 0.5);
    const double c = rng.uniform(-0.5, 0.5);
    const double d = rng.uniform(-0.4, 0.4);
    const double e = rng.uniform(-0.5, 0.5);
    inst.driver.expr = sum(sum(affine_term(a, Variable::Y), affine_term(c, Variable::Z)),
                           sum(affine_term(d, Variable::M1), lit(e)));
    inst.driver.lambda = std::max({std::fabs(a), std::fabs(c), std::fabs(d)});
    inst.driver.regime = DriverRegime::Lipschitz;

    // Frozen per-level laws from a random node process.
    inst.frozen.laws.reserve(static_cast<std::size_t>(lat.levels()));
    for (int i = 0; i < lat.levels(); ++i) {
        std::vector<double> w(static_cast<std::size_t>(i) + 1);
        for (auto& x : w) x = rng.uniform(-1.0, 1.0);
        inst.frozen.laws.push_back(lat.node_marginal(i, w));
    }

    const double q0 = rng.uniform(-0.5, 0.5);
    const double q1 = rng.uniform(-0.8, 0.8);
    const double q2 = rng.uniform(0.0, 0.6);
    inst.terminal.expr =
        sum(sum(lit(q0), affine_term(q1, Variable::B)),
            Expr::binary(BinaryOp::Mul, lit(q2), Expr::unary(UnaryOp::Abs, var(Variable::B))));

    // Obstacle values directly on nodes, terminal slice clamped under xi.
    const double c0 = rng.uniform(-0.5, 0.5);
    const double c1 = rng.uniform(-0.6, 0.6);
    const double c2 = rng.uniform(0.0, 0.5);
    inst.obstacle = lat.make_process();
    const int n = lat.grid().n_steps;
    for (int i = 0; i <= n; ++i) {
        const auto b = lat.values(i);
        for (int j = 0; j <= i; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            inst.obstacle[i][ju] = c0 + c1 * b[ju] + c2 * std::fabs(b[ju]);
        }
    }
    const auto xi = inst.terminal.realize(lat);
    for (std::size_t j = 0; j < xi.size(); ++j)
        inst.obstacle[n][j] = std::min(inst.obstacle[n][j], xi[j] - 0.05);
    return inst;
}

Problem make_lipschitz_instance(Rng& rng, int n_steps, bool monotone) {
    for (int attempt = 0; attempt < 500; ++attempt) {
        Problem prob;
        prob.horizon = 1.0;
        prob.n_steps = n_steps;
        prob.regime = ProblemRegime::Lipschitz;
        prob.p_exponent = rng.uniform(1.8, 3.0);

        // In monotone mode the y and m1 couplings stay nonnegative so the
        // comparison principle propagates through the fixed-point iteration.
        const double a = rng.uniform(0.05, 0.25) * (monotone ? 1.0 : (rng.coin() ? 1.0 : -1.0));
        const double c = rng.uniform(-0.25, 0.25);
        const double d = rng.uniform(0.0, 0.2) * (monotone ? 1.0 : (rng.coin() ? 1.0 : -1.0));
        const double e = rng.uniform(-0.3, 0.3);
        prob.driver.expr = sum(sum(affine_term(a, Variable::Y), affine_term(c, Variable::Z)),
                               sum(affine_term(d, Variable::M1), lit(e)));
        prob.driver.lambda = std::max({std::fabs(a), std::fabs(c), std::fabs(d)});
        prob.driver.regime = DriverRegime::Lipschitz;

        prob.terminal.expr = clipped_terminal(rng.uniform(-0.3, 0.5), rng.uniform(0.3, 1.0),
                                              -2.0, 2.0);

        const double g1 = rng.uniform(0.0, 0.15);
        const double g2 = rng.uniform(0.0, 0.15);
        prob.obstacle = binding_obstacle(Lattice::build(prob.horizon, prob.n_steps),
                                         prob.terminal, g1, g2, rng.uniform(0.1, 0.4),
                                         rng.uniform(0.05, 0.3));

        const GateParams gp = prob.gate_params();
        const GateReport gate = lipschitz_gate(gp);
        if (!gate.accept || gate.value > 0.90) continue;
        const ContractionWindow w = find_contraction_window(gp);
        const double predicted = g1 + g2 + 2.0 * prob.driver.lambda * std::min(w.delta, 1.0);
        if (predicted > 0.40) continue;
        if (w.delta < 2.0 / n_steps) continue;  // window must hold >= 2 grid steps

        const Lattice lat = make_lattice(prob);
        try {
            validate_terminal_compatibility(prob, lat);
        } catch (const ConfigError&) {
            continue;
        }
        return prob;
    }
    throw NumericError("make_lipschitz_instance: rejection sampling exhausted");
}

Problem make_quadratic_bounded_instance(Rng& rng, int n_steps, bool monotone) {
    for (int attempt = 0; attempt < 500; ++attempt) {
        Problem prob;
        prob.horizon = 1.0;
        prob.n_steps = n_steps;
        prob.regime = ProblemRegime::QuadraticBounded;
        prob.p_exponent = 2.0;

        // f = d*m1 - 0.5*z^2 + e: gamma = 1 keeps the Lemma A.1 bound tight
        // enough that a x100-inflated z is detected.
        const double d = rng.uniform(0.0, 0.1) * (monotone ? 1.0 : (rng.coin() ? 1.0 : -1.0));
        const double e = rng.uniform(-0.2, 0.2);
        prob.driver.expr = sum(sum(affine_term(d, Variable::M1), lit(e)),
                               Expr::binary(BinaryOp::Mul, lit(-0.5),
                                            Expr::unary(UnaryOp::Sq, var(Variable::Z))));
        prob.driver.lambda = std::fabs(d);
        prob.driver.alpha = std::fabs(e);
        prob.driver.beta = std::fabs(d);
        prob.driver.gamma = 1.0;
        prob.driver.convexity = Convexity::Concave;
        prob.driver.regime = DriverRegime::Quadratic;

        prob.terminal.expr = clipped_terminal(rng.uniform(-0.2, 0.3), rng.uniform(0.4, 1.0),
                                              -1.0, 1.0);

        const double gsum = rng.uniform(0.3, 0.7);
        const double g1 = gsum * rng.uniform(0.2, 0.8);
        const double g2 = gsum - g1;
        prob.obstacle = binding_obstacle(Lattice::build(prob.horizon, prob.n_steps),
                                         prob.terminal, g1, g2, rng.uniform(0.1, 0.4),
                                         rng.uniform(0.05, 0.3));
        prob.obstacle.bound = g1 + g2 + 4.0;
        prob.solver.max_iter = 200;

        const Lattice lat = make_lattice(prob);
        try {
            validate_terminal_compatibility(prob, lat);
        } catch (const ConfigError&) {
            continue;
        }
        return prob;
    }
    throw NumericError("make_quadratic_bounded_instance: rejection sampling exhausted");
}

Problem make_quadratic_unbounded_instance(Rng& rng, int n_steps, bool monotone) {
    for (int attempt = 0; attempt < 500; ++attempt) {
        Problem prob;
        prob.horizon = 1.0;
        prob.n_steps = n_steps;
        prob.regime = ProblemRegime::QuadraticUnbounded;
        prob.p_exponent = 2.0;

        // Concave driver a*y + d*am + q*z^2, q < 0. The y-term keeps the
        // freeze-full and law-only solution maps genuinely distinct. The
        // abs-mean functional is not monotone in Y, so comparison batteries
        // couple through m1 instead.
        const double a = rng.uniform(0.02, 0.1) * (monotone ? 1.0 : (rng.coin() ? 1.0 : -1.0));
        const double d = rng.uniform(0.0, 0.1) * (monotone ? 1.0 : (rng.coin() ? 1.0 : -1.0));
        const double q = rng.uniform(-0.5, -0.2);
        prob.driver.expr = sum(sum(affine_term(a, Variable::Y),
                                   affine_term(d, monotone ? Variable::M1 : Variable::Am)),
                               Expr::binary(BinaryOp::Mul, lit(q),
                                            Expr::unary(UnaryOp::Sq, var(Variable::Z))));
        prob.driver.lambda = std::max(std::fabs(a), std::fabs(d));
        prob.driver.alpha = 0.0;
        prob.driver.beta = std::max(std::fabs(a), std::fabs(d));
        prob.driver.gamma = 2.0 * std::fabs(q);
        prob.driver.convexity = Convexity::Concave;
        prob.driver.regime = DriverRegime::Quadratic;

        prob.terminal.expr = affine_term(rng.uniform(0.5, 1.0), Variable::B);

        const double gsum = rng.uniform(0.05, 0.2);  // 4*gsum <= 0.8
        const double g1 = gsum * rng.uniform(0.0, 1.0);
        const double g2 = gsum - g1;
        prob.obstacle = binding_obstacle(Lattice::build(prob.horizon, prob.n_steps),
                                         prob.terminal, g1, g2, rng.uniform(0.3, 0.8),
                                         rng.uniform(0.05, 0.3));
        prob.solver.m_max = 60;

        const Lattice lat = make_lattice(prob);
        try {
            validate_terminal_compatibility(prob, lat);
        } catch (const ConfigError&) {
            continue;
        }
        return prob;
    }
    throw NumericError("make_quadratic_unbounded_instance: rejection sampling exhausted");
}

}  // namespace mfrbsde::battery
