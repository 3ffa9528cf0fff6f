#pragma once

#include <cstdint>
#include <vector>

#include "mfrbsde/rbsde.hpp"

namespace mfrbsde {

// Brute-force Snell oracle on the non-recombining expansion of the lattice.
// Stopping rules are path objects: a stop/continue mark per tree node such
// that every root-to-leaf path stops exactly once (leaves forced to stop).
// Tree node (level, path) maps to lattice node (level, popcount(path)); the
// path bit at position k is the k-th move, 1 = up.
//
// Depths are small by design: the rule count f(k) = 1 + f(k-1)^2 grows
// doubly exponentially (2, 5, 26, 677, 458330 for k = 1..5).

struct StoppingRule {
    int depth = 0;
    std::uint64_t stop_mask = 0;  // bit (2^level - 1) + path
};

inline int tree_node_index(int level, std::uint32_t path) {
    return (1 << level) - 1 + static_cast<int>(path);
}

bool rule_stops_at(const StoppingRule& rule, int level, std::uint32_t path);

// Exactly-once property checked by traversing every root-to-leaf path.
bool validate_rule(const StoppingRule& rule);

// Exhaustive duplicate-free enumeration; depth > 5 is refused.
std::vector<StoppingRule> enumerate_stopping_rules(int depth);

struct TreeProcess {
    std::vector<std::vector<double>> levels;  // level i holds 2^i path values

    double root() const { return levels[0][0]; }
};

// Backward induction that freezes the value at stopped nodes (payoff read at
// the matching lattice node) and applies the BSDE step elsewhere. Equals
// solve_bsde exactly when the rule stops only at the terminal level.
TreeProcess g_evaluate(const Lattice& lat, const DriverSpec& driver, const FrozenInputs& frozen,
                       const StoppingRule& rule, const NodeProcess& payoff);

// Max over all enumerated rules of the g-evaluation with payoff = terminal at
// stop-at-T nodes and the obstacle at earlier stops. Lattice depth <= 4.
double snell_bruteforce(const Lattice& lat, const DriverSpec& driver, const FrozenInputs& frozen,
                        const TerminalCondition& terminal, const NodeProcess& obstacle);

}  // namespace mfrbsde
