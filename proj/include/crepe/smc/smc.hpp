#pragma once

#include "crepe/core/errors.hpp"
#include "crepe/core/logmath.hpp"
#include "crepe/core/parallel.hpp"
#include "crepe/core/rng.hpp"
#include "crepe/core/types.hpp"
#include "crepe/pt/diagnostics.hpp"

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace crepe::smc {

template <class State>
struct ParticleSystem {
    std::vector<State> particles;
    std::vector<double> log_weights;
    std::vector<std::vector<int>> ancestry;  // parent indices per resampling event
    std::vector<double> ess_history;         // normalized ESS at every checkpoint
};

struct EssValue {
    double absolute = 0.0;
    double normalized = 0.0;
};

EssValue ess(std::span<const double> log_weights);

// Offspring parent indices from one uniform u in (0, 1): positions (u + i) / n.
std::vector<int> systematic_indices(std::span<const double> weights, int n, double u);

enum class Resampling { none, systematic, partial };

struct SmcConfig {
    int particles = 1;
    Resampling resampling = Resampling::systematic;
    double fraction = 0.8;
    double ess_threshold = 0.2;  // resample when normalized ESS <= threshold
    std::uint64_t seed = 0;
    int workers = 1;
};

// Result of a (partial) resampling step on normalized weights: new parent for each slot and
// the new normalized weight of each slot.
struct ResamplePlan {
    std::vector<int> parents;
    std::vector<double> weights;
    std::vector<int> replaced;  // slots that received a new particle
};

ResamplePlan plan_systematic(std::span<const double> log_weights, double u);
// The ceil(fraction N) lowest-weight slots are redrawn within their own stratum in
// proportion to weight; each receives the stratum mass divided by its size, so the
// total and the stratum expectation are preserved. Survivors keep their weights.
ResamplePlan plan_partial(std::span<const double> log_weights, double fraction, double u);

template <class State>
void apply_plan(ParticleSystem<State>& ps, const ResamplePlan& plan) {
    std::vector<State> next(ps.particles.size());
    for (std::size_t i = 0; i < next.size(); ++i) next[i] = ps.particles[plan.parents[i]];
    ps.particles = std::move(next);
    // Keep the log-weight scale: store normalized weights as logs.
    for (std::size_t i = 0; i < plan.weights.size(); ++i) ps.log_weights[i] = std::log(plan.weights[i]);
    ps.ancestry.push_back(plan.parents);
}

template <class State>
void systematic_resample(ParticleSystem<State>& ps, RngStream& rng) {
    apply_plan(ps, plan_systematic(ps.log_weights, rng.uniform()));
}

template <class State>
void partial_resample(ParticleSystem<State>& ps, double fraction, RngStream& rng) {
    apply_plan(ps, plan_partial(ps.log_weights, fraction, rng.uniform()));
}

template <class State>
struct SmcResult {
    ParticleSystem<State> system;
    std::vector<State> samples;                   // completed to t_min
    std::vector<double> terminal_increments;      // summed incremental log-weights per final particle lineage
    std::vector<int> resample_levels;
    pt::NfeCounters nfe;
};

// Feynman-Kac particle sweep from t_max to t_trunc over the PT grid: each level moves every particle
// K backward proposal sub-steps and adds -(log pi-ratio + log R^Q) of its own path.
template <class System>
SmcResult<typename System::State> smc_run(System& sys, const SmcConfig& cfg) {
    using State = typename System::State;
    if (cfg.particles < 1) throw ConfigError("invalid-config", "SMC needs at least one particle");
    if (!(cfg.fraction > 0.0 && cfg.fraction <= 1.0)) throw ConfigError("invalid-config", "fraction must be in (0, 1]");
    if (!(cfg.ess_threshold > 0.0 && cfg.ess_threshold <= 1.0))
        throw ConfigError("invalid-config", "ess_threshold must be in (0, 1]");
    const int M = sys.num_levels();
    const int N = cfg.particles;
    SmcResult<State> res;
    auto& ps = res.system;
    ps.particles.resize(N);
    ps.log_weights.assign(N, 0.0);
    std::vector<double> incr(N, 0.0);
    for (int i = 0; i < N; ++i) {
        RngStream rng(cfg.seed, {static_cast<std::uint32_t>(M), static_cast<std::uint64_t>(i), Purpose::smc_init});
        ps.particles[i] = sys.sample_reference(rng);
        ps.log_weights[i] = sys.log_reference_weight(ps.particles[i]);
    }
    sys.begin_iteration(0);
    for (int m = M; m >= 1; --m) {
        std::vector<std::uint64_t> nfe(N, 0), rew(N, 0);
        std::vector<double> inc(N, kNegInf);
        parallel_for(N, cfg.workers, [&](int i) {
            RngStream rng(cfg.seed, {static_cast<std::uint32_t>(m), static_cast<std::uint64_t>(i), Purpose::smc_propagate});
            try {
                auto path = sys.simulate(ps.particles[i], m, Direction::backward, rng);
                inc[i] = -sys.score_path(path, m);
                nfe[i] = path.nfe;
                rew[i] = path.reward_evals;
                ps.particles[i] = path.states.front();
            } catch (const NumericalError&) {
                inc[i] = kNegInf;
            }
        });
        for (int i = 0; i < N; ++i) {
            res.nfe.path += nfe[i];
            res.nfe.reward += rew[i];
            ps.log_weights[i] += std::isfinite(inc[i]) ? inc[i] : kNegInf;
            incr[i] += inc[i];
        }
        bool all_dead = true;
        for (double w : ps.log_weights) all_dead = all_dead && !(w > kNegInf);
        if (all_dead) throw NumericalError("degenerate-weights", "all particle weights vanished at level " + std::to_string(m));
        const double e = ess(ps.log_weights).normalized;
        ps.ess_history.push_back(e);
        if (cfg.resampling == Resampling::none || N == 1 || e > cfg.ess_threshold) continue;
        RngStream rr(cfg.seed, {static_cast<std::uint32_t>(m), 0, Purpose::smc_resample});
        const ResamplePlan plan = cfg.resampling == Resampling::systematic
                                      ? plan_systematic(ps.log_weights, rr.uniform())
                                      : plan_partial(ps.log_weights, cfg.fraction, rr.uniform());
        std::vector<double> next_incr(N);
        for (int i = 0; i < N; ++i) next_incr[i] = incr[plan.parents[i]];
        incr = std::move(next_incr);
        apply_plan(ps, plan);
        res.resample_levels.push_back(m);
    }
    res.terminal_increments = incr;
    res.samples.resize(N);
    for (int i = 0; i < N; ++i) {
        RngStream rng(cfg.seed, {0, static_cast<std::uint64_t>(i), Purpose::completion});
        res.samples[i] = sys.complete(ps.particles[i], rng, res.nfe.completion);
    }
    return res;
}

}  // namespace crepe::smc
