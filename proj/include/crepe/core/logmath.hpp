#pragma once

#include <span>
#include <vector>

namespace crepe {

double logsumexp(std::span<const double> values);
inline double logsumexp(const std::vector<double>& values) { return logsumexp(std::span<const double>(values)); }

double log_add(double a, double b);

// Normalized exp(v - logsumexp(v)).
std::vector<double> softmax(std::span<const double> values);

}  // namespace crepe
