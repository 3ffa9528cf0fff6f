#include "mfrbsde/lattice.hpp"

#include <cmath>
#include <string>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

Lattice Lattice::build(double horizon, int n_steps) {
    if (!(horizon > 0.0)) throw ConfigError("lattice: horizon must be positive");
    if (n_steps < 1) throw ConfigError("lattice: n_steps must be >= 1");

    Lattice lat;
    lat.grid_ = TimeGrid{horizon, n_steps, horizon / n_steps};
    lat.sqrt_dt_ = std::sqrt(lat.grid_.dt);
    lat.values_.resize(static_cast<std::size_t>(n_steps) + 1);
    lat.probs_.resize(static_cast<std::size_t>(n_steps) + 1);

    for (int i = 0; i <= n_steps; ++i) {
        auto& vals = lat.values_[static_cast<std::size_t>(i)];
        vals.resize(static_cast<std::size_t>(i) + 1);
        for (int j = 0; j <= i; ++j) vals[static_cast<std::size_t>(j)] = (2 * j - i) * lat.sqrt_dt_;
    }

    // Binomial weights by pairwise halving; avoids overflow of C(n, k) and
    // keeps per-level sums at 1 to within a few ulps.
    lat.probs_[0] = {1.0};
    for (int i = 1; i <= n_steps; ++i) {
        const auto& prev = lat.probs_[static_cast<std::size_t>(i - 1)];
        auto& cur = lat.probs_[static_cast<std::size_t>(i)];
        cur.assign(static_cast<std::size_t>(i) + 1, 0.0);
        for (int j = 0; j < i; ++j) {
            cur[static_cast<std::size_t>(j)] += 0.5 * prev[static_cast<std::size_t>(j)];
            cur[static_cast<std::size_t>(j) + 1] += 0.5 * prev[static_cast<std::size_t>(j)];
        }
    }
    return lat;
}

std::span<const double> Lattice::values(int level) const {
    check_slice(level, static_cast<std::size_t>(level) + 1, "values");
    return values_[static_cast<std::size_t>(level)];
}

std::span<const double> Lattice::probs(int level) const {
    check_slice(level, static_cast<std::size_t>(level) + 1, "probs");
    return probs_[static_cast<std::size_t>(level)];
}

void Lattice::check_slice(int level, std::size_t len, const char* what) const {
    if (level < 0 || level >= levels())
        throw ContractError(std::string("lattice: level out of range in ") + what);
    if (len != static_cast<std::size_t>(level) + 1)
        throw ContractError(std::string("lattice: slice length mismatch in ") + what);
}

std::vector<double> Lattice::conditional_expectation(int level,
                                                     std::span<const double> next) const {
    if (level < 0 || level + 1 >= levels())
        throw ContractError("conditional_expectation: level out of range");
    if (next.size() != static_cast<std::size_t>(level) + 2)
        throw ContractError("conditional_expectation: next_values has wrong shape");
    std::vector<double> out(static_cast<std::size_t>(level) + 1);
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = 0.5 * (next[j] + next[j + 1]);
    return out;
}

std::vector<double> Lattice::z_projection(int level, std::span<const double> next) const {
    if (level < 0 || level + 1 >= levels())
        throw ContractError("z_projection: level out of range");
    if (next.size() != static_cast<std::size_t>(level) + 2)
        throw ContractError("z_projection: next_values has wrong shape");
    std::vector<double> out(static_cast<std::size_t>(level) + 1);
    const double denom = 2.0 * sqrt_dt_;
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = (next[j + 1] - next[j]) / denom;
    return out;
}

MarginalLaw Lattice::node_marginal(int level, std::span<const double> values_at_level) const {
    if (level < 0 || level >= levels()) throw ContractError("node_marginal: level out of range");
    if (values_at_level.size() != static_cast<std::size_t>(level) + 1)
        throw ContractError("node_marginal: values have wrong shape");
    return MarginalLaw::from_samples(values_at_level, probs(level));
}

NodeProcess Lattice::make_process() const {
    NodeProcess p;
    p.levels.resize(static_cast<std::size_t>(levels()));
    for (int i = 0; i < levels(); ++i)
        p.levels[static_cast<std::size_t>(i)].assign(static_cast<std::size_t>(i) + 1, 0.0);
    return p;
}

NodeProcess Lattice::conditional_expectation_process(std::span<const double> terminal) const {
    const int n = grid_.n_steps;
    if (terminal.size() != static_cast<std::size_t>(n) + 1)
        throw ContractError("conditional_expectation_process: terminal has wrong shape");
    NodeProcess p = make_process();
    p[n].assign(terminal.begin(), terminal.end());
    for (int i = n - 1; i >= 0; --i) p[i] = conditional_expectation(i, p[i + 1]);
    return p;
}

double sup_abs_diff(const NodeProcess& a, const NodeProcess& b) {
    double m = 0.0;
    const std::size_t nl = std::min(a.levels.size(), b.levels.size());
    for (std::size_t i = 0; i < nl; ++i) {
        const auto& xa = a.levels[i];
        const auto& xb = b.levels[i];
        const std::size_t n = std::min(xa.size(), xb.size());
        for (std::size_t j = 0; j < n; ++j) {
            const double d = std::fabs(xa[j] - xb[j]);
            if (d > m) m = d;
        }
    }
    return m;
}

}  // namespace mfrbsde
