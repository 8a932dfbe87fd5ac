#include "crepe/discrete/ctmc.hpp"

#include "crepe/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace crepe::discrete {

double clip_time(double t) { return std::min(t, kMaskClip); }

double masking_rate(double t) {
    if (t < 0.0 || t > 1.0) throw ConfigError("invalid-schedule", "masking time outside [0, 1]");
    return 1.0 / (1.0 - clip_time(t));
}

RateMatrixSpec forward_masking_spec(int vocab, int mask) {
    RateMatrixSpec spec;
    spec.role = Direction::forward;
    spec.vocab = vocab;
    spec.rates = [mask](const Tokens& x, int pos, double t, std::span<double> out) {
        std::fill(out.begin(), out.end(), 0.0);
        if (x[pos] != mask) out[mask] = masking_rate(t);
    };
    return spec;
}

void finalize_kernel(std::span<double> row, const KernelOptions& opts) {
    const double lo = opts.strict ? 0.0 : opts.floor;
    for (double& p : row) {
        if (!std::isfinite(p)) p = lo;
        if (p < lo) p = lo;
    }
    if (opts.renormalize) {
        double z = 0.0;
        for (double p : row) z += p;
        for (double& p : row) p /= z;
    }
}

void rates_to_kernel(std::span<double> row, int self, double dt, const KernelOptions& opts) {
    double leave = 0.0;
    for (int v = 0; v < static_cast<int>(row.size()); ++v) {
        if (v == self) continue;
        row[v] *= dt;
        leave += row[v];
    }
    row[self] = 1.0 - leave;
    finalize_kernel(row, opts);
}

void euler_kernel_probs(const Tokens& x, int pos, double t, double dt, const RateMatrixSpec& spec,
                        const KernelOptions& opts, std::span<double> out) {
    if (!(dt > 0.0)) throw ConfigError("invalid-schedule", "euler kernel needs dt > 0");
    if (static_cast<int>(out.size()) != spec.vocab) throw ConfigError("shape", "kernel row length != vocab");
    spec.rates(x, pos, t, out);
    rates_to_kernel(out, x[pos], dt, opts);
}

Tokens ctmc_step(const Tokens& x, double t, double dt, const RateMatrixSpec& spec, const KernelOptions& opts,
                 RngStream& rng) {
    Tokens y = x;
    std::vector<double> row(spec.vocab);
    for (int i = 0; i < static_cast<int>(x.size()); ++i) {
        euler_kernel_probs(x, i, t, dt, spec, opts, row);
        y[i] = rng.categorical(row);
    }
    return y;
}

LogRne rne_discrete_ctmc(const PathSegment<Tokens>& path, const RateMatrixSpec& fwd, const RateMatrixSpec& bwd,
                         const KernelOptions& opts) {
    if (path.times.size() != path.states.size() || path.states.empty())
        throw ConfigError("shape", "path times/states length mismatch");
    std::vector<double> row(std::max(fwd.vocab, bwd.vocab));
    double acc = 0.0;
    for (std::size_t k = 1; k < path.states.size(); ++k) {
        const double dt = path.times[k] - path.times[k - 1];
        const Tokens& a = path.states[k - 1];
        const Tokens& b = path.states[k];
        for (int i = 0; i < static_cast<int>(a.size()); ++i) {
            std::span<double> rb(row.data(), bwd.vocab);
            euler_kernel_probs(b, i, path.times[k], dt, bwd, opts, rb);
            acc += std::log(rb[a[i]]);
            std::span<double> rf(row.data(), fwd.vocab);
            euler_kernel_probs(a, i, path.times[k - 1], dt, fwd, opts, rf);
            acc -= std::log(rf[b[i]]);
        }
    }
    if (std::isnan(acc)) acc = kNegInf;
    return {acc, ProcessTag::proposal, -1};
}

}  // namespace crepe::discrete
