#include "crepe/core/logmath.hpp"

#include "crepe/core/errors.hpp"
#include "crepe/core/types.hpp"

#include <algorithm>
#include <cmath>

namespace crepe {

double logsumexp(std::span<const double> values) {
    if (values.empty()) throw ConfigError("invalid-argument", "logsumexp of an empty list");
    const double mx = *std::max_element(values.begin(), values.end());
    if (mx == kNegInf) return kNegInf;
    if (!std::isfinite(mx)) return mx;
    double acc = 0.0;
    for (double v : values) acc += std::exp(v - mx);
    return mx + std::log(acc);
}

double log_add(double a, double b) {
    if (a < b) std::swap(a, b);
    if (b == kNegInf) return a;
    return a + std::log1p(std::exp(b - a));
}

std::vector<double> softmax(std::span<const double> values) {
    const double z = logsumexp(values);
    std::vector<double> out(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) out[i] = std::exp(values[i] - z);
    return out;
}

bool is_permutation_of_levels(const std::vector<int>& ids) {
    std::vector<char> seen(ids.size(), 0);
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= ids.size() || seen[id]) return false;
        seen[id] = 1;
    }
    return true;
}

}  // namespace crepe
