#pragma once

#include <cstdint>
#include <random>

#include "mfrbsde/meanfield.hpp"
#include "mfrbsde/snell.hpp"

namespace mfrbsde::battery {

// Deterministic uniform doubles: the raw mt19937_64 bit stream mapped by
// ldexp, so instance batteries are reproducible across platforms.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double uniform(double lo, double hi) {
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return lo + (hi - lo) * u;
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + static_cast<int>(gen_() % static_cast<std::uint64_t>(hi - lo + 1));
    }

    bool coin() { return (gen_() & 1u) != 0; }

  private:
    std::mt19937_64 gen_;
};

// Frozen reflected instance on a depth-sized lattice for the Snell oracle:
// affine Lipschitz driver in (y, z, m1) with truthful lambda, random frozen
// per-level laws, random obstacle process clamped under the terminal payoff.
struct SnellInstance {
    Lattice lat;
    DriverSpec driver;
    FrozenInputs frozen;
    TerminalCondition terminal;
    NodeProcess obstacle;
};

SnellInstance make_snell_instance(int depth, Rng& rng);

// Gated mean-field Lipschitz instance for the Picard contraction battery.
// Coefficient budgets keep the measured window contraction ratio below ~0.4
// so convergence to 1e-9 fits in 25 iterations per window. `monotone` forces
// nonnegative couplings (comparison-principle batteries).
Problem make_lipschitz_instance(Rng& rng, int n_steps, bool monotone = false);

// Bounded-quadratic instance: gamma = 1 driver -q*z^2 family with a clipped
// terminal payoff, gamma1+gamma2 in [0.3, 0.7].
Problem make_quadratic_bounded_instance(Rng& rng, int n_steps, bool monotone = false);

// Concave unbounded instance with 4(gamma1+gamma2) <= 0.8 and terminal b.
Problem make_quadratic_unbounded_instance(Rng& rng, int n_steps, bool monotone = false);

}  // namespace mfrbsde::battery
