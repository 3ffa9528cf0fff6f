#include "mfrbsde/marginal_law.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mfrbsde/errors.hpp"

namespace mfrbsde {

MarginalLaw MarginalLaw::from_samples(std::span<const double> values,
                                      std::span<const double> weights,
                                      double merge_tol) {
    if (values.size() != weights.size())
        throw ContractError("MarginalLaw: values/weights size mismatch");
    if (values.empty()) throw ContractError("MarginalLaw: empty atom list");

    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t i, std::size_t j) { return values[i] < values[j]; });

    MarginalLaw law;
    law.atoms_.reserve(values.size());
    double total = 0.0;
    for (std::size_t idx : order) {
        const double v = values[idx];
        const double w = weights[idx];
        if (!std::isfinite(v)) throw ContractError("MarginalLaw: non-finite atom value");
        if (!(w > 0.0)) throw ContractError("MarginalLaw: non-positive atom weight");
        total += w;
        if (!law.atoms_.empty() && v - law.atoms_.back().value <= merge_tol) {
            law.atoms_.back().weight += w;
        } else {
            law.atoms_.push_back({v, w});
        }
    }
    if (std::fabs(total - 1.0) > 1e-9)
        throw ContractError("MarginalLaw: weights sum to " + std::to_string(total));
    return law;
}

MarginalLaw MarginalLaw::dirac(double value) {
    const double w = 1.0;
    return from_samples(std::span<const double>(&value, 1), std::span<const double>(&w, 1));
}

double MarginalLaw::mean() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.weight * a.value;
    return s;
}

double MarginalLaw::abs_mean() const {
    double s = 0.0;
    for (const Atom& a : atoms_) s += a.weight * std::fabs(a.value);
    return s;
}

double moment(const MarginalLaw& law, MomentKind kind) {
    return kind == MomentKind::Mean ? law.mean() : law.abs_mean();
}

double wasserstein1(const MarginalLaw& a, const MarginalLaw& b) {
    // Walk the merged weight partition; on each segment both quantile
    // functions are constant.
    const auto& xa = a.atoms();
    const auto& xb = b.atoms();
    std::size_t i = 0, j = 0;
    double cum_a = xa[0].weight, cum_b = xb[0].weight, cum = 0.0, dist = 0.0;
    for (;;) {
        const double next = std::min(cum_a, cum_b);
        dist += (next - cum) * std::fabs(xa[i].value - xb[j].value);
        cum = next;
        if (cum >= 1.0 - 1e-15) break;
        if (cum_a <= cum_b && i + 1 < xa.size()) cum_a += xa[++i].weight;
        else if (j + 1 < xb.size()) cum_b += xb[++j].weight;
        else if (i + 1 < xa.size()) cum_a += xa[++i].weight;
        else break;
    }
    return dist;
}

}  // namespace mfrbsde
