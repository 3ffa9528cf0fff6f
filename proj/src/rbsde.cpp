#include "mfrbsde/rbsde.hpp"

#include <cmath>
#include <string>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

SolutionTriple solve_reflected_range(const Lattice& lat, const DriverSpec& driver,
                                     const FrozenInputs& frozen, const NodeProcess& obstacle,
                                     std::span<const double> terminal_at_right,
                                     int left_level, int right_level, double compat_tol) {
    const TimeGrid& grid = lat.grid();
    if (left_level < 0 || right_level > grid.n_steps || left_level >= right_level)
        throw ContractError("solve_reflected_range: bad level range");
    if (terminal_at_right.size() != static_cast<std::size_t>(right_level) + 1)
        throw ContractError("solve_reflected_range: terminal slice has wrong shape");
    check_step_size(driver, grid);

    const auto& h_term = obstacle[right_level];
    for (std::size_t j = 0; j < terminal_at_right.size(); ++j) {
        if (h_term[j] > terminal_at_right[j] + compat_tol)
            throw ConfigError("terminal compatibility violated: obstacle " +
                              std::to_string(h_term[j]) + " > terminal " +
                              std::to_string(terminal_at_right[j]) + " at node " +
                              std::to_string(j) + " of level " + std::to_string(right_level));
    }

    SolutionTriple out;
    out.y = lat.make_process();
    out.z = lat.make_process();
    out.dk = lat.make_process();
    out.obstacle = obstacle;
    out.y[right_level].assign(terminal_at_right.begin(), terminal_at_right.end());

    for (int i = right_level - 1; i >= left_level; --i) {
        const auto& next = out.y[i + 1];
        out.z[i] = lat.z_projection(i, next);
        const auto ex = lat.conditional_expectation(i, next);
        const double t = grid.time_at(i);
        const MarginalLaw& law = frozen.law_at(i);
        auto& yi = out.y[i];
        auto& dki = out.dk[i];
        const auto& hi = obstacle[i];
        for (int j = 0; j <= i; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            const double* fy = frozen.frozen_y ? &(*frozen.frozen_y)[i][ju] : nullptr;
            double y_free;
            try {
                y_free = backward_node_step(driver, t, grid.dt, ex[ju], out.z[i][ju], law, fy);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at level " + std::to_string(i) +
                                   " node " + std::to_string(j));
            }
            if (y_free >= hi[ju]) {
                yi[ju] = y_free;
                dki[ju] = 0.0;
            } else {
                yi[ju] = hi[ju];
                dki[ju] = hi[ju] - y_free;
            }
        }
    }

    accumulate_k(lat, out);
    return out;
}

SolutionTriple solve_reflected(const Lattice& lat, const DriverSpec& driver,
                               const FrozenInputs& frozen, const NodeProcess& obstacle,
                               const TerminalCondition& terminal) {
    const auto xi = terminal.realize(lat);
    return solve_reflected_range(lat, driver, frozen, obstacle, xi, 0, lat.grid().n_steps);
}

void accumulate_k(const Lattice& lat, SolutionTriple& triple) {
    const int n = lat.grid().n_steps;
    triple.k = lat.make_process();
    for (int i = 0; i < n; ++i) {
        const auto probs_i = lat.probs(i);
        const auto probs_next = lat.probs(i + 1);
        const auto& ki = triple.k[i];
        const auto& dki = triple.dk[i];
        auto& knext = triple.k[i + 1];
        for (int j = 0; j <= i + 1; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            double mass = 0.0;
            // parents of (i+1, j): (i, j-1) via up move and (i, j) via down move
            if (j >= 1) mass += 0.5 * probs_i[ju - 1] * (ki[ju - 1] + dki[ju - 1]);
            if (j <= i) mass += 0.5 * probs_i[ju] * (ki[ju] + dki[ju]);
            knext[ju] = mass / probs_next[ju];
        }
    }
}

double skorokhod_residual(const Lattice& lat, const SolutionTriple& triple,
                          const NodeProcess& obstacle) {
    const int n = lat.grid().n_steps;
    double residual = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto probs = lat.probs(i);
        for (int j = 0; j <= i; ++j) {
            const auto ju = static_cast<std::size_t>(j);
            residual += probs[ju] * (triple.y[i][ju] - obstacle[i][ju]) * triple.dk[i][ju];
        }
    }
    return residual;
}

}  // namespace mfrbsde
