#pragma once

#include "crepe/core/rng.hpp"
#include "crepe/core/types.hpp"

#include <functional>
#include <span>
#include <vector>

namespace crepe::discrete {

inline constexpr double kMaskClip = 1.0 - 1e-4;

// Linear masking: survival probability of an unmasked token is 1 - t.
double masking_rate(double t);
double clip_time(double t);

// rates(x, pos, t, out): off-diagonal jump rates out[v] from x[pos] to v; out[x[pos]] is ignored.
using RateFn = std::function<void(const Tokens& x, int pos, double t, std::span<double> out)>;

struct RateMatrixSpec {
    Direction role = Direction::forward;
    int vocab = 0;  // V including the mask token
    RateFn rates;
};

RateMatrixSpec forward_masking_spec(int vocab, int mask);

struct KernelOptions {
    double floor = 1e-8;
    bool renormalize = true;
    bool strict = false;  // clipped entries become exact zeros, so taking them gives log R = -inf
};

// Turns delta_{v,self} + rate(v) dt into a probability row in place.
void finalize_kernel(std::span<double> row, const KernelOptions& opts);

// row holds off-diagonal rates on entry (row[self] ignored) and the kernel on exit.
void rates_to_kernel(std::span<double> row, int self, double dt, const KernelOptions& opts);

void euler_kernel_probs(const Tokens& x, int pos, double t, double dt, const RateMatrixSpec& spec,
                        const KernelOptions& opts, std::span<double> out);

Tokens ctmc_step(const Tokens& x, double t, double dt, const RateMatrixSpec& spec, const KernelOptions& opts,
                 RngStream& rng);

LogRne rne_discrete_ctmc(const PathSegment<Tokens>& path, const RateMatrixSpec& fwd, const RateMatrixSpec& bwd,
                         const KernelOptions& opts);

}  // namespace crepe::discrete
