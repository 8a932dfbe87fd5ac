#include "crepe/smc/smc.hpp"

#include <algorithm>
#include <numeric>

namespace crepe::smc {

namespace {

std::vector<double> normalized(std::span<const double> log_weights) {
    const double z = logsumexp(log_weights);
    if (!std::isfinite(z)) throw NumericalError("degenerate-weights", "weights are not normalizable");
    std::vector<double> w(log_weights.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::exp(log_weights[i] - z);
    return w;
}

}  // namespace

EssValue ess(std::span<const double> log_weights) {
    const double z = logsumexp(log_weights);
    if (!std::isfinite(z)) throw NumericalError("degenerate-weights", "weights are not normalizable");
    std::vector<double> twice(log_weights.size());
    for (std::size_t i = 0; i < twice.size(); ++i) twice[i] = 2.0 * (log_weights[i] - z);
    const double abs_ess = std::exp(-logsumexp(twice));
    return {abs_ess, abs_ess / static_cast<double>(log_weights.size())};
}

std::vector<int> systematic_indices(std::span<const double> weights, int n, double u) {
    double total = 0.0;
    for (double w : weights) total += w;
    std::vector<int> out(n);
    double cum = weights.empty() ? 0.0 : weights[0] / total;
    std::size_t j = 0;
    for (int i = 0; i < n; ++i) {
        const double pos = (u + i) / n;
        while (pos > cum && j + 1 < weights.size()) cum += weights[++j] / total;
        out[i] = static_cast<int>(j);
    }
    return out;
}

ResamplePlan plan_systematic(std::span<const double> log_weights, double u) {
    const auto w = normalized(log_weights);
    const int n = static_cast<int>(w.size());
    ResamplePlan plan;
    plan.parents = systematic_indices(w, n, u);
    plan.weights.assign(n, 1.0 / n);
    plan.replaced.resize(n);
    std::iota(plan.replaced.begin(), plan.replaced.end(), 0);
    return plan;
}

ResamplePlan plan_partial(std::span<const double> log_weights, double fraction, double u) {
    const auto w = normalized(log_weights);
    const int n = static_cast<int>(w.size());
    const int r = std::min(n, static_cast<int>(std::ceil(fraction * n - 1e-12)));
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return w[a] < w[b]; });
    std::vector<int> stratum(order.begin(), order.begin() + r);
    std::sort(stratum.begin(), stratum.end());

    ResamplePlan plan;
    plan.parents.resize(n);
    std::iota(plan.parents.begin(), plan.parents.end(), 0);
    plan.weights = w;
    plan.replaced = stratum;
    if (r == 0) return plan;
    std::vector<double> sw(r);
    double mass = 0.0;
    for (int i = 0; i < r; ++i) {
        sw[i] = w[stratum[i]];
        mass += sw[i];
    }
    if (!(mass > 0.0)) return plan;
    const auto idx = systematic_indices(sw, r, u);
    for (int i = 0; i < r; ++i) {
        plan.parents[stratum[i]] = stratum[idx[i]];
        plan.weights[stratum[i]] = mass / r;
    }
    return plan;
}

}  // namespace crepe::smc
