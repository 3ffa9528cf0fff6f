#pragma once

#include <span>
#include <vector>

#include "mfrbsde/marginal_law.hpp"

namespace mfrbsde {

struct TimeGrid {
    double horizon = 0.0;
    int n_steps = 0;
    double dt = 0.0;  // horizon / n_steps, fixed at construction

    double time_at(int level) const { return level == n_steps ? horizon : level * dt; }
};

// Value arrays aligned with lattice levels (one scalar per node). Level i
// holds i+1 entries; processes defined on a sub-range simply leave the other
// levels empty.
struct NodeProcess {
    std::vector<std::vector<double>> levels;

    std::vector<double>& operator[](int level) { return levels[static_cast<std::size_t>(level)]; }
    const std::vector<double>& operator[](int level) const {
        return levels[static_cast<std::size_t>(level)];
    }
    int level_count() const { return static_cast<int>(levels.size()); }
};

// Recombining +-sqrt(dt) random-walk approximation of Brownian motion.
// Level i carries values b_{i,j} = (2j - i)*sqrt(dt) and binomial weights;
// conditional expectations along the lattice are exact two-point averages.
// All operations are pure; instances are safe for concurrent read-only use.
class Lattice {
  public:
    static Lattice build(double horizon, int n_steps);  // throws ConfigError

    const TimeGrid& grid() const { return grid_; }
    int levels() const { return grid_.n_steps + 1; }
    double sqrt_dt() const { return sqrt_dt_; }

    std::span<const double> values(int level) const;
    std::span<const double> probs(int level) const;

    // E[next | level]: value at node j is (next[j] + next[j+1]) / 2.
    std::vector<double> conditional_expectation(int level, std::span<const double> next) const;

    // Martingale-increment projection E[next * dB | level] / dt on the
    // two-point branch: (next[j+1] - next[j]) / (2 sqrt(dt)).
    std::vector<double> z_projection(int level, std::span<const double> next) const;

    MarginalLaw node_marginal(int level, std::span<const double> values_at_level) const;

    NodeProcess make_process() const;  // zero-filled, all levels allocated

    // Backward chain of conditional expectations from terminal data down to
    // level 0; result holds E_t[terminal] at every level.
    NodeProcess conditional_expectation_process(std::span<const double> terminal) const;

  private:
    void check_slice(int level, std::size_t len, const char* what) const;

    TimeGrid grid_;
    double sqrt_dt_ = 0.0;
    std::vector<std::vector<double>> values_;
    std::vector<std::vector<double>> probs_;
};

double sup_abs_diff(const NodeProcess& a, const NodeProcess& b);

}  // namespace mfrbsde
