#pragma once

#include <span>
#include <vector>

namespace mfrbsde {

// Finite weighted-atom representation of a one-dimensional probability law.
// Atoms are kept sorted with strictly increasing values; weights sum to 1.
class MarginalLaw {
  public:
    struct Atom {
        double value;
        double weight;
    };

    // Sorts, merges atoms whose values coincide within `merge_tol`, validates
    // that weights are positive and sum to 1 within 1e-9.
    static MarginalLaw from_samples(std::span<const double> values,
                                    std::span<const double> weights,
                                    double merge_tol = 1e-14);

    static MarginalLaw dirac(double value);

    const std::vector<Atom>& atoms() const { return atoms_; }

    double mean() const;
    double abs_mean() const;  // equals wasserstein1(*this, dirac(0))

  private:
    std::vector<Atom> atoms_;
};

enum class MomentKind { Mean, AbsMean };

double moment(const MarginalLaw& law, MomentKind kind);

// W1 as the L1 distance between quantile functions, exact on the real line.
double wasserstein1(const MarginalLaw& a, const MarginalLaw& b);

}  // namespace mfrbsde
