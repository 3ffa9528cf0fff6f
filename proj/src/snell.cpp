#include "mfrbsde/snell.hpp"

#include <bit>
#include <limits>
#include <string>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

bool rule_stops_at(const StoppingRule& rule, int level, std::uint32_t path) {
    return (rule.stop_mask >> tree_node_index(level, path)) & 1u;
}

bool validate_rule(const StoppingRule& rule) {
    if (rule.depth < 0 || rule.depth > 5) return false;
    const std::uint32_t n_paths = 1u << rule.depth;
    for (std::uint32_t leaf = 0; leaf < n_paths; ++leaf) {
        int stops = 0;
        for (int level = 0; level <= rule.depth; ++level) {
            const std::uint32_t prefix = leaf & ((1u << level) - 1u);
            if (rule_stops_at(rule, level, prefix)) ++stops;
        }
        if (stops != 1) return false;
    }
    return true;
}

namespace {

// Rules of the subtree rooted at (level, path): either stop at the root of
// the subtree, or recurse into both children and combine independently.
std::vector<std::uint64_t> subtree_rules(int depth, int level, std::uint32_t path) {
    const std::uint64_t here = std::uint64_t{1} << tree_node_index(level, path);
    if (level == depth) return {here};
    const auto left = subtree_rules(depth, level + 1, path);
    const auto right = subtree_rules(depth, level + 1, path | (1u << level));
    std::vector<std::uint64_t> out;
    out.reserve(1 + left.size() * right.size());
    out.push_back(here);
    for (const auto l : left)
        for (const auto r : right) out.push_back(l | r);
    return out;
}

}  // namespace

std::vector<StoppingRule> enumerate_stopping_rules(int depth) {
    if (depth < 0) throw ConfigError("enumerate_stopping_rules: negative depth");
    if (depth > 5)
        throw ConfigError("enumerate_stopping_rules: depth " + std::to_string(depth) +
                          " refused, rule count grows doubly exponentially (max 5)");
    std::vector<StoppingRule> rules;
    for (const auto mask : subtree_rules(depth, 0, 0)) rules.push_back({depth, mask});
    return rules;
}

TreeProcess g_evaluate(const Lattice& lat, const DriverSpec& driver, const FrozenInputs& frozen,
                       const StoppingRule& rule, const NodeProcess& payoff) {
    const TimeGrid& grid = lat.grid();
    const int depth = grid.n_steps;
    if (rule.depth != depth) throw ContractError("g_evaluate: rule depth does not match lattice");
    if (!validate_rule(rule)) throw ContractError("g_evaluate: invalid stopping rule");
    check_step_size(driver, grid);

    TreeProcess v;
    v.levels.resize(static_cast<std::size_t>(depth) + 1);
    for (int i = 0; i <= depth; ++i)
        v.levels[static_cast<std::size_t>(i)].resize(std::size_t{1} << i);

    for (std::uint32_t p = 0; p < (1u << depth); ++p)
        v.levels[static_cast<std::size_t>(depth)][p] =
            payoff[depth][static_cast<std::size_t>(std::popcount(p))];

    for (int i = depth - 1; i >= 0; --i) {
        const double t = grid.time_at(i);
        const MarginalLaw& law = frozen.law_at(i);
        const auto& next = v.levels[static_cast<std::size_t>(i) + 1];
        auto& cur = v.levels[static_cast<std::size_t>(i)];
        for (std::uint32_t p = 0; p < (1u << i); ++p) {
            const int j = std::popcount(p);
            if (rule_stops_at(rule, i, p)) {
                cur[p] = payoff[i][static_cast<std::size_t>(j)];
                continue;
            }
            const double v_down = next[p];
            const double v_up = next[p | (1u << i)];
            const double expectation = 0.5 * (v_down + v_up);
            const double z = (v_up - v_down) / (2.0 * lat.sqrt_dt());
            const double* fy =
                frozen.frozen_y ? &(*frozen.frozen_y)[i][static_cast<std::size_t>(j)] : nullptr;
            cur[p] = backward_node_step(driver, t, grid.dt, expectation, z, law, fy);
        }
    }
    return v;
}

double snell_bruteforce(const Lattice& lat, const DriverSpec& driver, const FrozenInputs& frozen,
                        const TerminalCondition& terminal, const NodeProcess& obstacle) {
    const int depth = lat.grid().n_steps;
    if (depth > 4)
        throw ConfigError("snell_bruteforce: depth " + std::to_string(depth) +
                          " refused (exhaustive enumeration, max 4)");

    const auto xi = terminal.realize(lat);
    const auto& h_term = obstacle[depth];
    for (std::size_t j = 0; j < xi.size(); ++j) {
        if (h_term[j] > xi[j])
            throw ConfigError("snell_bruteforce: terminal compatibility violated at node " +
                              std::to_string(j));
    }

    NodeProcess payoff = lat.make_process();
    for (int i = 0; i < depth; ++i) payoff[i] = obstacle[i];
    payoff[depth].assign(xi.begin(), xi.end());

    double best = -std::numeric_limits<double>::infinity();
    for (const StoppingRule& rule : enumerate_stopping_rules(depth)) {
        const double v = g_evaluate(lat, driver, frozen, rule, payoff).root();
        if (v > best) best = v;
    }
    return best;
}

}  // namespace mfrbsde
