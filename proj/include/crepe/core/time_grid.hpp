#pragma once

#include <span>
#include <vector>

namespace crepe {

// Fine diffusion-time grid with PT levels placed every `substeps` points above
// `trunc_index`. Level m sits at times[trunc_index + m * substeps].
struct TimeGrid {
    std::vector<double> times;
    int substeps = 1;
    int trunc_index = 0;

    int num_levels() const;  // M: highest level index
    double level_time(int m) const;
    int level_index(int m) const { return trunc_index + m * substeps; }
    // K+1 ascending sub-times covering [t_{m-1}, t_m]; m >= 1.
    std::span<const double> segment(int m) const;
    // Ascending sub-times covering [t_min, t_trunc].
    std::span<const double> truncated_part() const;
    double t_min() const { return times.front(); }
    double t_max() const { return times.back(); }
    double truncation_time() const { return times[trunc_index]; }

    bool operator==(const TimeGrid&) const = default;
};

// Raw EDM times [t_max^{1/rho} + (i/n)(t_min^{1/rho} - t_max^{1/rho})]^rho, returned ascending.
std::vector<double> edm_times(double t_min, double t_max, int n_steps, double rho);
std::vector<double> uniform_times(double t_min, double t_max, int n_steps);

// Validates and attaches level structure; t_trunc snaps to the nearest fine time.
TimeGrid make_grid(std::vector<double> ascending_times, int substeps, double t_trunc);

TimeGrid build_edm_grid(double t_min, double t_max, int n_steps, double rho);

}  // namespace crepe
