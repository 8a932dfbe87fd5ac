#include "crepe/core/time_grid.hpp"

#include "crepe/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crepe {

int TimeGrid::num_levels() const {
    return (static_cast<int>(times.size()) - 1 - trunc_index) / substeps;
}

double TimeGrid::level_time(int m) const { return times.at(level_index(m)); }

std::span<const double> TimeGrid::segment(int m) const {
    if (m < 1 || m > num_levels()) throw ConfigError("shape", "segment index out of range: " + std::to_string(m));
    return std::span<const double>(times).subspan(level_index(m - 1), substeps + 1);
}

std::span<const double> TimeGrid::truncated_part() const {
    return std::span<const double>(times).subspan(0, trunc_index + 1);
}

static void check_interval(double t_min, double t_max, int n_steps) {
    if (!(t_min > 0.0)) throw ConfigError("invalid-schedule", "t_min must be positive");
    if (!(t_max > t_min)) throw ConfigError("invalid-schedule", "degenerate interval: t_max must exceed t_min");
    if (n_steps < 1) throw ConfigError("invalid-schedule", "n_steps must be positive");
}

std::vector<double> edm_times(double t_min, double t_max, int n_steps, double rho) {
    check_interval(t_min, t_max, n_steps);
    if (n_steps < 2) throw ConfigError("invalid-schedule", "EDM grid needs n_steps >= 2");
    if (!(rho >= 1.0)) throw ConfigError("invalid-schedule", "rho must be >= 1");
    const double a = std::pow(t_max, 1.0 / rho);
    const double b = std::pow(t_min, 1.0 / rho);
    std::vector<double> out(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) {
        const double frac = static_cast<double>(i) / n_steps;
        out[n_steps - i] = std::pow(a + frac * (b - a), rho);
    }
    out.front() = t_min;
    out.back() = t_max;
    return out;
}

std::vector<double> uniform_times(double t_min, double t_max, int n_steps) {
    check_interval(t_min, t_max, n_steps);
    std::vector<double> out(n_steps + 1);
    for (int i = 0; i <= n_steps; ++i) out[i] = t_min + (t_max - t_min) * i / n_steps;
    out.back() = t_max;
    return out;
}

TimeGrid make_grid(std::vector<double> ascending_times, int substeps, double t_trunc) {
    if (substeps < 1) throw ConfigError("invalid-schedule", "substeps_per_level must be >= 1");
    if (ascending_times.size() < 2) throw ConfigError("invalid-schedule", "grid needs at least two times");
    for (std::size_t i = 1; i < ascending_times.size(); ++i)
        if (!(ascending_times[i] > ascending_times[i - 1]))
            throw ConfigError("invalid-schedule", "grid times must be strictly increasing");
    if (t_trunc < ascending_times.front() || t_trunc > ascending_times.back())
        throw ConfigError("invalid-schedule", "truncation time outside the grid");

    auto it = std::min_element(ascending_times.begin(), ascending_times.end(),
                               [&](double a, double b) { return std::abs(a - t_trunc) < std::abs(b - t_trunc); });
    TimeGrid g;
    g.trunc_index = static_cast<int>(it - ascending_times.begin());
    g.substeps = substeps;
    const int above = static_cast<int>(ascending_times.size()) - 1 - g.trunc_index;
    if (above % substeps != 0)
        throw ConfigError("invalid-schedule", std::to_string(above) + " steps above truncation not divisible by K=" +
                                                  std::to_string(substeps));
    g.times = std::move(ascending_times);
    return g;
}

TimeGrid build_edm_grid(double t_min, double t_max, int n_steps, double rho) {
    return make_grid(edm_times(t_min, t_max, n_steps, rho), 1, t_min);
}

}  // namespace crepe
