#include "mfrbsde/bsde.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

std::vector<double> TerminalCondition::realize(const Lattice& lat) const {
    const int n = lat.grid().n_steps;
    const auto b = lat.values(n);
    std::vector<double> out(b.size());
    for (std::size_t j = 0; j < b.size(); ++j) {
        EvalEnv env;
        env.t = lat.grid().horizon;
        env.b = b[j];
        out[j] = expr.eval(env);
        if (!std::isfinite(out[j]))
            throw ConfigError("terminal condition not finite at node " + std::to_string(j));
    }
    return out;
}

void check_step_size(const DriverSpec& driver, const TimeGrid& grid) {
    if (driver.lambda * grid.dt >= 1.0)
        throw StepSizeError(
            "driver Lipschitz constant times dt is " + std::to_string(driver.lambda * grid.dt) +
            " >= 1; increase n_steps beyond " + std::to_string(grid.n_steps));
}

double backward_node_step(const DriverSpec& driver, double t, double dt,
                          double expectation, double z, const MarginalLaw& law,
                          const double* frozen_y_value) {
    if (frozen_y_value) return expectation + dt * driver.eval(t, *frozen_y_value, z, law);

    // Implicit in y: the map y -> expectation + dt*f(t,y,z) is a contraction
    // once lambda*dt < 1, so plain iteration converges; damping halves the
    // step if a mis-declared constant makes the residual grow.
    double y = expectation + dt * driver.eval(t, expectation, z, law);
    double damping = 1.0;
    double prev_abs = std::numeric_limits<double>::infinity();
    for (int it = 0; it < 300; ++it) {
        const double g = expectation + dt * driver.eval(t, y, z, law);
        const double r = g - y;
        const double abs_r = std::fabs(r);
        if (abs_r <= 1e-13) return g;
        if (abs_r >= prev_abs) damping *= 0.5;
        prev_abs = abs_r;
        y += damping * r;
    }
    throw NumericError("implicit node step did not reach residual 1e-13 (t=" +
                       std::to_string(t) + ")");
}

BsdePair solve_bsde_range(const Lattice& lat, const DriverSpec& driver,
                          const FrozenInputs& frozen,
                          std::span<const double> terminal_at_right,
                          int left_level, int right_level) {
    const TimeGrid& grid = lat.grid();
    if (left_level < 0 || right_level > grid.n_steps || left_level >= right_level)
        throw ContractError("solve_bsde_range: bad level range");
    if (terminal_at_right.size() != static_cast<std::size_t>(right_level) + 1)
        throw ContractError("solve_bsde_range: terminal slice has wrong shape");
    if (frozen.laws.size() != static_cast<std::size_t>(lat.levels()))
        throw ContractError("solve_bsde_range: frozen laws missing for some levels");
    check_step_size(driver, grid);

    BsdePair out{lat.make_process(), lat.make_process()};
    out.y[right_level].assign(terminal_at_right.begin(), terminal_at_right.end());

    for (int i = right_level - 1; i >= left_level; --i) {
        const auto& next = out.y[i + 1];
        out.z[i] = lat.z_projection(i, next);
        const auto ex = lat.conditional_expectation(i, next);
        const double t = grid.time_at(i);
        const MarginalLaw& law = frozen.law_at(i);
        auto& yi = out.y[i];
        for (int j = 0; j <= i; ++j) {
            const double* fy = frozen.frozen_y
                                   ? &(*frozen.frozen_y)[i][static_cast<std::size_t>(j)]
                                   : nullptr;
            try {
                yi[static_cast<std::size_t>(j)] = backward_node_step(
                    driver, t, grid.dt, ex[static_cast<std::size_t>(j)],
                    out.z[i][static_cast<std::size_t>(j)], law, fy);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " at level " + std::to_string(i) +
                                   " node " + std::to_string(j));
            }
        }
    }
    return out;
}

BsdePair solve_bsde(const Lattice& lat, const DriverSpec& driver, const FrozenInputs& frozen,
                    const TerminalCondition& terminal) {
    const auto xi = terminal.realize(lat);
    return solve_bsde_range(lat, driver, frozen, xi, 0, lat.grid().n_steps);
}

}  // namespace mfrbsde
