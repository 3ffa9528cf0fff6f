#include "mfrbsde/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

GateReport lipschitz_gate(const GateParams& gp) {
    const double p = gp.p_exponent;
    if (!(p > 1.0)) throw ConfigError("lipschitz_gate: p_exponent must exceed 1");
    const double g1 = gp.gamma1, g2 = gp.gamma2;
    if (g1 < 0.0 || g2 < 0.0) throw ConfigError("lipschitz_gate: negative constants");
    const double sum = g1 + g2;
    const double inner = std::pow(p / (p - 1.0), p) * g1 + g2;
    const double value = std::pow(sum, (p - 1.0) / p) * std::pow(inner, 1.0 / p);
    return {value < 1.0, value};
}

double lambda_mu(const GateParams& gp, double mu) {
    const double p = gp.p_exponent;
    if (!(p > 1.0)) throw ConfigError("lambda_mu: p_exponent must exceed 1");
    if (!(mu > 1.0 && mu < p))
        throw ConfigError("lambda_mu: mu must lie in (1, p), got " + std::to_string(mu));
    const double lam = gp.lambda, g1 = gp.gamma1, g2 = gp.gamma2;
    const double d = (mu - 1.0) * (mu - 1.0);
    const double growth = std::exp(lam * lam * (mu - 1.0) / 2.0);
    const double first = std::pow(g1 + g2 + 2.0 * lam * d, (p - 1.0) / p);
    const double doob = std::pow(p / (p - mu), p / mu);
    const double second = std::pow((g1 + lam * d) * doob + (g2 + lam * d), 1.0 / p);
    return growth * first * second;
}

ContractionWindow find_contraction_window(const GateParams& gp, double margin) {
    const GateReport gate = lipschitz_gate(gp);
    if (!gate.accept)
        throw GateError("contraction window: Lipschitz gate rejected, value " +
                        std::to_string(gate.value));
    const double p = gp.p_exponent;
    const double target = 1.0 - margin;
    const double lo_edge = 1.0 + 1e-9;
    const double hi_edge = p - 1e-9;

    if (lambda_mu(gp, lo_edge) > target)
        throw GateError("contraction window: no mu with Lambda <= " + std::to_string(target) +
                        "; retry with a smaller margin");

    double mu_star;
    if (lambda_mu(gp, hi_edge) <= target) {
        mu_star = hi_edge;  // Lambda stays below target on all of (1, p)
    } else {
        double lo = lo_edge, hi = hi_edge;
        while (hi - lo > 1e-10) {
            const double mid = 0.5 * (lo + hi);
            if (lambda_mu(gp, mid) <= target) lo = mid;
            else hi = mid;
        }
        mu_star = lo;
    }

    ContractionWindow w;
    w.mu_star = mu_star;
    w.delta = (mu_star - 1.0) * (mu_star - 1.0);
    if (gp.horizon > 0.0 && w.delta > gp.horizon) w.delta = gp.horizon;
    w.lambda_at_mu_star = lambda_mu(gp, mu_star);
    return w;
}

std::pair<double, double> unbounded_window_lhs(const GateParams& gp, double h, double nu,
                                               double nu_tilde) {
    const double e = std::exp(gp.beta * h);
    return {4.0 * e * nu_tilde * (gp.gamma1 + gp.gamma2 + gp.beta * h),
            4.0 * e * nu * nu_tilde * gp.gamma1};
}

QuadraticWindow quadratic_window(const GateParams& gp, QuadRegime regime) {
    const double g1 = gp.gamma1, g2 = gp.gamma2, beta = gp.beta;
    const double cap = gp.horizon > 0.0 ? gp.horizon : std::numeric_limits<double>::infinity();

    if (regime == QuadRegime::Bounded) {
        if (!(g1 + g2 < 1.0))
            throw GateError("quadratic gate: gamma1 + gamma2 = " + std::to_string(g1 + g2) +
                            " >= 1");
        QuadraticWindow w;
        w.window_len = beta == 0.0 ? cap : std::min(0.5 * (1.0 - g1 - g2) / (2.0 * beta), cap);
        return w;
    }

    const double gate = 4.0 * (g1 + g2);
    if (!(gate < 1.0))
        throw GateError("unbounded gate: 4(gamma1 + gamma2) = " + std::to_string(gate) + " >= 1");
    const double slack = 1.0 - gate;

    QuadraticWindow w;
    w.nu = w.nu_tilde = 1.0 + slack / 4.0;
    const double safety = 0.99;
    auto admissible = [&](double h) {
        const auto [a, b] = unbounded_window_lhs(gp, h, w.nu, w.nu_tilde);
        return a <= safety && b <= safety;
    };
    if (!admissible(0.0))
        throw GateError("unbounded window: inequalities fail already at h = 0");
    if (beta == 0.0 || admissible(cap)) {
        w.window_len = cap;
        return w;
    }
    double lo = 0.0, hi = cap;
    while (hi - lo > 1e-12) {
        const double mid = 0.5 * (lo + hi);
        if (admissible(mid)) lo = mid;
        else hi = mid;
    }
    w.window_len = lo;
    return w;
}

double bmo_norm(const Lattice& lat, const NodeProcess& z) {
    const int n = lat.grid().n_steps;
    const double dt = lat.grid().dt;
    std::vector<double> remaining(static_cast<std::size_t>(n) + 1, 0.0);  // level n: zero
    double max_sq = 0.0;
    for (int i = n - 1; i >= 0; --i) {
        std::vector<double> cur(static_cast<std::size_t>(i) + 1);
        for (int j = 0; j <= i; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double zij = z[i][ju];
            cur[ju] = zij * zij * dt + 0.5 * (remaining[ju] + remaining[ju + 1]);
            if (cur[ju] > max_sq) max_sq = cur[ju];
        }
        remaining = std::move(cur);
    }
    return std::sqrt(max_sq);
}

BmoBoundReport bmo_bound_check(const Lattice& lat, const SolutionTriple& triple,
                               const GateParams& gp) {
    if (!(gp.gamma > 0.0))
        throw ConfigError("bmo_bound_check: not applicable, gamma must be positive");
    double y_sup = 0.0;
    for (const auto& level : triple.y.levels)
        for (const double v : level) y_sup = std::max(y_sup, std::fabs(v));

    BmoBoundReport rep;
    const double norm = bmo_norm(lat, triple.z);
    rep.lhs = norm * norm;
    const double T = lat.grid().horizon;
    rep.rhs = (1.0 + 2.0 * gp.gamma * T * (gp.alpha + gp.beta * y_sup)) *
              std::exp(4.0 * gp.gamma * y_sup) / (gp.gamma * gp.gamma);
    rep.pass = rep.lhs <= 1.10 * rep.rhs;
    return rep;
}

ExpMomentReport exp_moment_check(const Lattice& lat, const BsdePair& pair, const GateParams& gp,
                                 double p, ExpMomentVariant variant) {
    if (!(p >= 1.0)) throw ConfigError("exp_moment_check: p must be >= 1");
    if (!(gp.gamma > 0.0)) throw ConfigError("exp_moment_check: gamma must be positive");
    const int n = lat.grid().n_steps;
    const double T = lat.grid().horizon;
    const double pg = p * gp.gamma;

    const auto& eta = pair.y[n];
    auto transformed_terminal = [&](double tau) {
        // exp(p g e^(beta(T-t)) |eta| + p g Integral_t^T alpha e^(beta(s-t)) ds)
        const double scale = std::exp(gp.beta * tau);
        const double integral = gp.beta == 0.0
                                    ? gp.alpha * tau
                                    : gp.alpha * (std::exp(gp.beta * tau) - 1.0) / gp.beta;
        std::vector<double> g(eta.size());
        for (std::size_t j = 0; j < eta.size(); ++j) {
            const double e = variant == ExpMomentVariant::Abs ? std::fabs(eta[j])
                                                              : std::max(eta[j], 0.0);
            g[j] = std::exp(pg * (scale * e + integral));
        }
        return g;
    };

    ExpMomentReport rep;
    rep.max_violation = -std::numeric_limits<double>::infinity();
    for (int i = n; i >= 0; --i) {
        const double t = lat.grid().time_at(i);
        std::vector<double> rhs = transformed_terminal(T - t);
        for (int lvl = n - 1; lvl >= i; --lvl)
            rhs = lat.conditional_expectation(lvl, rhs);
        for (int j = 0; j <= i; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double yv = pair.y[i][ju];
            const double e = variant == ExpMomentVariant::Abs ? std::fabs(yv)
                                                              : std::max(yv, 0.0);
            const double lhs = std::exp(pg * e);
            const double violation = (lhs - rhs[ju]) / rhs[ju];
            if (violation > rep.max_violation) rep.max_violation = violation;
        }
    }
    rep.pass = rep.max_violation <= 0.02;
    return rep;
}

namespace {

// Deterministic probe grid on [-2, 2] (and [0, T-ish] for t).
std::vector<double> probe_axis(int count, double lo, double hi) {
    std::vector<double> xs(static_cast<std::size_t>(count));
    for (int k = 0; k < count; ++k)
        xs[static_cast<std::size_t>(k)] = lo + (hi - lo) * k / (count - 1.0);
    return xs;
}

template <typename Eval>
void probe_slot(ProbeReport& rep, const std::string& slot, double declared, int count,
                Eval&& eval_at) {
    const double step = 1e-3;
    for (const double x : probe_axis(count, -2.0, 2.0)) {
        double f0, f1;
        try {
            f0 = eval_at(x);
            f1 = eval_at(x + step);
        } catch (const DomainError&) {
            continue;  // outside the expression's domain; nothing to flag
        }
        const double quotient = std::fabs(f1 - f0) / step;
        if (quotient > declared * 1.01 + 1e-12)
            rep.flags.push_back({slot, x, quotient, declared});
    }
}

}  // namespace

ProbeReport lipschitz_probe(const DriverSpec& driver, int sample_count) {
    ProbeReport rep;
    const int count = std::max(sample_count, 3);
    EvalEnv base;
    base.t = 0.5;
    base.m1 = 0.3;
    base.am = 0.4;

    probe_slot(rep, "y", driver.lambda, count, [&](double x) {
        EvalEnv env = base;
        env.y = x;
        return driver.expr.eval(env);
    });
    probe_slot(rep, "m1", driver.lambda, count, [&](double x) {
        EvalEnv env = base;
        env.m1 = x;
        return driver.expr.eval(env);
    });
    probe_slot(rep, "am", driver.lambda, count, [&](double x) {
        EvalEnv env = base;
        env.am = x;
        return driver.expr.eval(env);
    });
    if (driver.regime == DriverRegime::Lipschitz) {
        probe_slot(rep, "z", driver.lambda, count, [&](double x) {
            EvalEnv env = base;
            env.z = x;
            return driver.expr.eval(env);
        });
    }
    return rep;
}

ProbeReport lipschitz_probe(const ObstacleSpec& obstacle, int sample_count) {
    ProbeReport rep;
    const int count = std::max(sample_count, 3);
    EvalEnv base;
    base.t = 0.5;
    base.m1 = 0.3;
    base.am = 0.4;

    probe_slot(rep, "y", obstacle.gamma1, count, [&](double x) {
        EvalEnv env = base;
        env.y = x;
        return obstacle.expr.eval(env);
    });
    probe_slot(rep, "m1", obstacle.gamma2, count, [&](double x) {
        EvalEnv env = base;
        env.m1 = x;
        return obstacle.expr.eval(env);
    });
    probe_slot(rep, "am", obstacle.gamma2, count, [&](double x) {
        EvalEnv env = base;
        env.am = x;
        return obstacle.expr.eval(env);
    });
    return rep;
}

}  // namespace mfrbsde
