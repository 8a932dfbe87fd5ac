#pragma once

#include "crepe/core/rng.hpp"
#include "crepe/core/types.hpp"
#include "crepe/gaussian/noise_schedule.hpp"

#include <functional>
#include <span>

namespace crepe::gaussian {

using DriftFn = std::function<Vec(const Vec&, double)>;

// Forward processes step t -> t + dt with mean x + drift dt; backward processes
// step t -> t - dt with mean x - drift dt.
struct SdeProcess {
    DriftFn drift;
    NoiseSchedule noise;
    Direction direction = Direction::forward;
};

double log_normal_iso(const Vec& x, const Vec& mean, double var);

// log N(x; m1, v1) - log N(x; m2, v2), cancellation-free when v1 == v2.
double log_normal_ratio(const Vec& x, const Vec& m1, double v1, const Vec& m2, double v2);

Vec em_step(const Vec& x, double t, double dt, const SdeProcess& proc, RngStream& rng);
Vec em_step(const Vec& x, double t, double dt, const SdeProcess& proc, const Vec& eps);

double log_kernel(const Vec& x_to, const Vec& x_from, double t_eval, double dt, const SdeProcess& proc);

// Kernel-product RNE from drifts already evaluated at every path state:
// forward kernel k uses fwd_drift[k-1] at s_{k-1}, backward kernel k uses bwd_drift[k] at s_k.
double log_rne_from_drifts(std::span<const double> times, std::span<const Vec> states, std::span<const Vec> fwd_drift,
                           std::span<const Vec> bwd_drift, const NoiseSchedule& noise);

// Same, reporting the kernel sums separately: sum log B and sum log F.
struct KernelSums {
    double log_bwd = 0.0;
    double log_fwd = 0.0;
};
KernelSums kernel_sums(std::span<const double> times, std::span<const Vec> states, std::span<const Vec> fwd_drift,
                       std::span<const Vec> bwd_drift, const NoiseSchedule& noise);

LogRne rne_discrete(const PathSegment<Vec>& path, const SdeProcess& fwd, const SdeProcess& bwd);

LogRne rne_path_integral(const PathSegment<Vec>& path, const DriftFn& mu, const DriftFn& nu, const NoiseSchedule& noise);

void check_path(std::span<const double> times, std::size_t n_states);

}  // namespace crepe::gaussian
