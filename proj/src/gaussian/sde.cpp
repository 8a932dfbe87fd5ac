#include "crepe/gaussian/sde.hpp"

#include "crepe/core/errors.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace crepe::gaussian {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;

void require_finite(const Vec& x, const char* where) {
    if (!x.allFinite()) throw NumericalError("non-finite", std::string("non-finite state in ") + where);
}

void require_variance(double var) {
    if (!(var > 0.0)) throw NumericalError("degenerate-kernel", "kernel variance sigma^2 dt must be positive");
}
}  // namespace

double log_normal_iso(const Vec& x, const Vec& mean, double var) {
    const double d = static_cast<double>(x.size());
    return -0.5 * ((x - mean).squaredNorm() / var + d * (kLog2Pi + std::log(var)));
}

double log_normal_ratio(const Vec& x, const Vec& m1, double v1, const Vec& m2, double v2) {
    if (v1 == v2) return (m1 - m2).dot(2.0 * x - m1 - m2) / (2.0 * v1);
    return log_normal_iso(x, m1, v1) - log_normal_iso(x, m2, v2);
}

Vec em_step(const Vec& x, double t, double dt, const SdeProcess& proc, const Vec& eps) {
    require_finite(x, "em_step");
    if (!(dt > 0.0)) throw ConfigError("invalid-schedule", "em_step needs dt > 0");
    const double sign = proc.direction == Direction::forward ? 1.0 : -1.0;
    return x + sign * dt * proc.drift(x, t) + proc.noise.sigma(t) * std::sqrt(dt) * eps;
}

Vec em_step(const Vec& x, double t, double dt, const SdeProcess& proc, RngStream& rng) {
    Vec eps(x.size());
    rng.fill_normal(eps);
    return em_step(x, t, dt, proc, eps);
}

double log_kernel(const Vec& x_to, const Vec& x_from, double t_eval, double dt, const SdeProcess& proc) {
    const double var = proc.noise.sigma2(t_eval) * dt;
    require_variance(var);
    const double sign = proc.direction == Direction::forward ? 1.0 : -1.0;
    return log_normal_iso(x_to, x_from + sign * dt * proc.drift(x_from, t_eval), var);
}

void check_path(std::span<const double> times, std::size_t n_states) {
    if (times.size() != n_states)
        throw ConfigError("shape", "path has " + std::to_string(n_states) + " states but " +
                                       std::to_string(times.size()) + " times");
    if (n_states == 0) throw ConfigError("shape", "empty path");
    for (std::size_t k = 1; k < times.size(); ++k)
        if (!(times[k] > times[k - 1])) throw ConfigError("shape", "path times must be strictly increasing");
}

KernelSums kernel_sums(std::span<const double> times, std::span<const Vec> states, std::span<const Vec> fwd_drift,
                       std::span<const Vec> bwd_drift, const NoiseSchedule& noise) {
    check_path(times, states.size());
    KernelSums out;
    for (std::size_t k = 1; k < states.size(); ++k) {
        const double dt = times[k] - times[k - 1];
        const double vf = noise.sigma2(times[k - 1]) * dt;
        const double vb = noise.sigma2(times[k]) * dt;
        require_variance(vf);
        require_variance(vb);
        out.log_fwd += log_normal_iso(states[k], states[k - 1] + dt * fwd_drift[k - 1], vf);
        out.log_bwd += log_normal_iso(states[k - 1], states[k] - dt * bwd_drift[k], vb);
    }
    return out;
}

double log_rne_from_drifts(std::span<const double> times, std::span<const Vec> states, std::span<const Vec> fwd_drift,
                           std::span<const Vec> bwd_drift, const NoiseSchedule& noise) {
    const KernelSums s = kernel_sums(times, states, fwd_drift, bwd_drift, noise);
    return s.log_bwd - s.log_fwd;
}

LogRne rne_discrete(const PathSegment<Vec>& path, const SdeProcess& fwd, const SdeProcess& bwd) {
    check_path(path.times, path.states.size());
    const std::size_t n = path.states.size();
    std::vector<Vec> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
        if (k + 1 < n) a[k] = fwd.drift(path.states[k], path.times[k]);
        if (k > 0) b[k] = bwd.drift(path.states[k], path.times[k]);
    }
    if (!(fwd.noise == bwd.noise)) {
        double acc = 0.0;
        for (std::size_t k = 1; k < n; ++k) {
            const double dt = path.times[k] - path.times[k - 1];
            const double vf = fwd.noise.sigma2(path.times[k - 1]) * dt;
            const double vb = bwd.noise.sigma2(path.times[k]) * dt;
            require_variance(vf);
            require_variance(vb);
            acc += log_normal_iso(path.states[k - 1], path.states[k] - dt * b[k], vb) -
                   log_normal_iso(path.states[k], path.states[k - 1] + dt * a[k - 1], vf);
        }
        return {acc, ProcessTag::proposal, -1};
    }
    return {log_rne_from_drifts(path.times, path.states, a, b, fwd.noise), ProcessTag::proposal, -1};
}

LogRne rne_path_integral(const PathSegment<Vec>& path, const DriftFn& mu, const DriftFn& nu,
                         const NoiseSchedule& noise) {
    check_path(path.times, path.states.size());
    double acc = 0.0;
    for (std::size_t k = 1; k < path.states.size(); ++k) {
        const double s0 = path.times[k - 1], s1 = path.times[k];
        const double dt = s1 - s0;
        const double v0 = noise.sigma2(s0), v1 = noise.sigma2(s1);
        if (!(v0 > 0.0) || !(v1 > 0.0)) throw NumericalError("degenerate-kernel", "sigma must be positive");
        const Vec dx = path.states[k] - path.states[k - 1];
        const Vec mu_l = mu(path.states[k - 1], s0);
        const Vec nu_l = nu(path.states[k - 1], s0);
        const Vec nu_r = nu(path.states[k], s1);
        acc += nu_r.dot(dx) / v1 - mu_l.dot(dx) / v0;
        acc += 0.5 * (mu_l.squaredNorm() - nu_l.squaredNorm()) / v0 * dt;
    }
    return {acc, ProcessTag::proposal, -1};
}

}  // namespace crepe::gaussian
