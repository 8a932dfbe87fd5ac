#pragma once

#include "crepe/gaussian/sde.hpp"

#include <utility>

namespace crepe::gaussian {

// Forward drift family accepted for the reference: f(x) = -kappa x.
struct DriftSpec {
    enum class Kind { zero, linear, general };
    Kind kind = Kind::zero;
    double kappa = 0.0;
};

// Gaussian reference diffusion: gamma_{t0} = N(mean0, var0 I) pushed through the
// forward SDE, so every gamma_t stays Gaussian.
struct ReferenceProcess {
    Vec mean0;
    double var0 = 1.0;
    double t0 = 0.0;
    NoiseSchedule noise;
    DriftSpec drift;

    std::pair<Vec, double> moments(double t) const;
    double log_density(const Vec& x, double t) const;
    Vec score(const Vec& x, double t) const;
    Vec forward_drift(const Vec& x, double t) const;
    Vec backward_drift(const Vec& x, double t) const;  // h_t = f_t - sigma_t^2 grad log gamma_t
    SdeProcess forward_process() const;
    SdeProcess backward_process() const;
};

std::pair<Vec, double> propagate_reference(const ReferenceProcess& ref, const DriftSpec& f, double t);

// Reference-stabilized kernel RNE: the Q kernels are divided by the matching
// reference kernels and the reference marginals supply the remaining ratio.
LogRne rne_stabilized(const PathSegment<Vec>& path, const SdeProcess& fwd, const SdeProcess& bwd,
                      const ReferenceProcess& ref);

double log_rne_stabilized_from_drifts(std::span<const double> times, std::span<const Vec> states,
                                      std::span<const Vec> fwd_drift, std::span<const Vec> bwd_drift,
                                      const NoiseSchedule& noise, const ReferenceProcess& ref);

}  // namespace crepe::gaussian
