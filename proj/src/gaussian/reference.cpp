#include "crepe/gaussian/reference.hpp"

#include "crepe/core/errors.hpp"

#include <cmath>

namespace crepe::gaussian {

namespace {

// dv/dt = -2 kappa v + sigma^2(t), classical RK4.
double integrate_variance(double v, double kappa, const NoiseSchedule& noise, double t0, double t1) {
    const int steps = 2000;
    const double h = (t1 - t0) / steps;
    auto rhs = [&](double t, double y) { return -2.0 * kappa * y + noise.sigma2(t); };
    double t = t0;
    for (int i = 0; i < steps; ++i) {
        const double k1 = rhs(t, v);
        const double k2 = rhs(t + 0.5 * h, v + 0.5 * h * k1);
        const double k3 = rhs(t + 0.5 * h, v + 0.5 * h * k2);
        const double k4 = rhs(t + h, v + h * k3);
        v += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    return v;
}

}  // namespace

std::pair<Vec, double> propagate_reference(const ReferenceProcess& ref, const DriftSpec& f, double t) {
    const double dt = t - ref.t0;
    switch (f.kind) {
        case DriftSpec::Kind::zero:
            return {ref.mean0, ref.var0 + ref.noise.var(t) - ref.noise.var(ref.t0)};
        case DriftSpec::Kind::linear: {
            const double decay = std::exp(-f.kappa * dt);
            Vec m = ref.mean0 * decay;
            if (f.kappa == 0.0) return {m, ref.var0 + ref.noise.var(t) - ref.noise.var(ref.t0)};
            if (ref.noise.kind == NoiseSchedule::Kind::constant) {
                const double d2 = decay * decay;
                return {m, ref.var0 * d2 + ref.noise.c / (2.0 * f.kappa) * (1.0 - d2)};
            }
            return {m, integrate_variance(ref.var0, f.kappa, ref.noise, ref.t0, t)};
        }
        case DriftSpec::Kind::general:
            break;
    }
    throw ConfigError("unsupported-reference", "reference propagation needs an affine forward drift");
}

std::pair<Vec, double> ReferenceProcess::moments(double t) const { return propagate_reference(*this, drift, t); }

double ReferenceProcess::log_density(const Vec& x, double t) const {
    const auto [m, v] = moments(t);
    return log_normal_iso(x, m, v);
}

Vec ReferenceProcess::score(const Vec& x, double t) const {
    const auto [m, v] = moments(t);
    return -(x - m) / v;
}

Vec ReferenceProcess::forward_drift(const Vec& x, double) const {
    if (drift.kind == DriftSpec::Kind::zero) return Vec::Zero(x.size());
    return -drift.kappa * x;
}

Vec ReferenceProcess::backward_drift(const Vec& x, double t) const {
    return forward_drift(x, t) - noise.sigma2(t) * score(x, t);
}

SdeProcess ReferenceProcess::forward_process() const {
    return {[this](const Vec& x, double t) { return forward_drift(x, t); }, noise, Direction::forward};
}

SdeProcess ReferenceProcess::backward_process() const {
    return {[this](const Vec& x, double t) { return backward_drift(x, t); }, noise, Direction::backward};
}

double log_rne_stabilized_from_drifts(std::span<const double> times, std::span<const Vec> states,
                                      std::span<const Vec> fwd_drift, std::span<const Vec> bwd_drift,
                                      const NoiseSchedule& noise, const ReferenceProcess& ref) {
    check_path(times, states.size());
    const std::size_t n = states.size();
    double acc = 0.0;
    for (std::size_t k = 1; k < n; ++k) {
        const double dt = times[k] - times[k - 1];
        const double vq_f = noise.sigma2(times[k - 1]) * dt;
        const double vq_b = noise.sigma2(times[k]) * dt;
        const double vg_f = ref.noise.sigma2(times[k - 1]) * dt;
        const double vg_b = ref.noise.sigma2(times[k]) * dt;
        if (!(vq_f > 0.0) || !(vq_b > 0.0) || !(vg_f > 0.0) || !(vg_b > 0.0))
            throw NumericalError("degenerate-kernel", "kernel variance sigma^2 dt must be positive");
        const Vec& xa = states[k - 1];
        const Vec& xb = states[k];
        // backward: log B^Q(xa | xb) - log B^Gamma(xa | xb)
        acc += log_normal_ratio(xa, xb - dt * bwd_drift[k], vq_b, xb - dt * ref.backward_drift(xb, times[k]), vg_b);
        // forward: log F^Gamma(xb | xa) - log F^Q(xb | xa)
        acc += log_normal_ratio(xb, xa + dt * ref.forward_drift(xa, times[k - 1]), vg_f, xa + dt * fwd_drift[k - 1],
                                vq_f);
    }
    return acc + ref.log_density(states.front(), times.front()) - ref.log_density(states.back(), times.back());
}

LogRne rne_stabilized(const PathSegment<Vec>& path, const SdeProcess& fwd, const SdeProcess& bwd,
                      const ReferenceProcess& ref) {
    check_path(path.times, path.states.size());
    if (!(fwd.noise == bwd.noise)) throw ConfigError("shape", "stabilized RNE needs matching fwd/bwd noise");
    const std::size_t n = path.states.size();
    std::vector<Vec> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (k + 1 < n) a[k] = fwd.drift(path.states[k], path.times[k]);
        if (k > 0) b[k] = bwd.drift(path.states[k], path.times[k]);
    }
    return {log_rne_stabilized_from_drifts(path.times, path.states, a, b, fwd.noise, ref), ProcessTag::proposal, -1};
}

}  // namespace crepe::gaussian
