#pragma once

#include "crepe/control/task.hpp"
#include "crepe/core/errors.hpp"
#include "crepe/core/parallel.hpp"
#include "crepe/core/rng.hpp"
#include "crepe/core/types.hpp"
#include "crepe/pt/diagnostics.hpp"

#include <spdlog/spdlog.h>

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

namespace crepe::pt {

struct EngineConfig {
    std::uint64_t iterations = 0;
    std::uint64_t burn_in = 0;
    std::uint64_t seed = 0;
    int workers = 1;
};

template <class State>
struct Sample {
    std::uint64_t iteration = 0;
    int replica = 0;
    State state;
};

// Replica exchange over the levels of a System (GaussianSystem or CtmcSystem).
template <class System>
class PtEngine {
public:
    using State = typename System::State;
    using Path = typename System::Path;
    // Called after every iteration with the completed level-0 state.
    using Observer = std::function<void(std::uint64_t n, int replica, const State& x)>;

    PtEngine(System& sys, EngineConfig cfg) : sys_(sys), cfg_(cfg) {
        if (cfg_.burn_in > cfg_.iterations && cfg_.iterations > 0)
            throw ConfigError("invalid-config", "burn_in must not exceed the iteration count");
        diag_.resize(sys_.num_levels());
    }

    Diagnostics& diagnostics() { return diag_; }
    const Diagnostics& diagnostics() const { return diag_; }
    const EngineConfig& config() const { return cfg_; }

    ReplicaEnsemble<State> init_ensemble() {
        const int M = sys_.num_levels();
        ReplicaEnsemble<State> ens;
        ens.states.resize(M + 1);
        ens.replica_ids.resize(M + 1);
        for (int m = 0; m <= M; ++m) ens.replica_ids[m] = m;
        RngStream top(cfg_.seed, {static_cast<std::uint32_t>(M), 0, Purpose::init});
        ens.states[M] = sys_.sample_reference(top);
        for (int m = M; m >= 1; --m) {
            RngStream rng(cfg_.seed, {static_cast<std::uint32_t>(m), 1, Purpose::init});
            Path p = sys_.simulate(ens.states[m], m, Direction::backward, rng);
            diag_.nfe.init += p.nfe;
            ens.states[m - 1] = p.states.front();
        }
        ens.iteration = 0;
        return ens;
    }

    void communication_sweep(ReplicaEnsemble<State>& ens, std::uint64_t n) {
        if (ens.iteration + 1 != n) throw ConfigError("invalid-argument", "sweep iteration out of order");
        const int M = sys_.num_levels();
        std::vector<int> pairs;
        for (int m = 1; m <= M; ++m)
            if (static_cast<std::uint64_t>(m % 2) == n % 2) pairs.push_back(m);

        struct Outcome {
            State lower, upper;
            double log_alpha = kNegInf;
            bool accept = false;
            bool degenerate = false;
            std::uint64_t nfe = 0, reward = 0;
        };
        std::vector<Outcome> out(pairs.size());
        parallel_for(static_cast<int>(pairs.size()), cfg_.workers, [&](int i) {
            const int m = pairs[i];
            Outcome& o = out[i];
            try {
                RngStream rf(cfg_.seed, {static_cast<std::uint32_t>(m), n, Purpose::forward_path});
                RngStream rb(cfg_.seed, {static_cast<std::uint32_t>(m), n, Purpose::backward_path});
                Path fwd = sys_.simulate(ens.states[m - 1], m, Direction::forward, rf);
                Path bwd = sys_.simulate(ens.states[m], m, Direction::backward, rb);
                const double sf = sys_.score_path(fwd, m);
                const double sb = sys_.score_path(bwd, m);
                o.nfe = fwd.nfe + bwd.nfe;
                o.reward = fwd.reward_evals + bwd.reward_evals;
                o.log_alpha = (sf == kNegInf || sb == kNegInf) ? kNegInf : std::min(0.0, sf - sb);
                o.degenerate = !std::isfinite(sf) || !std::isfinite(sb);
                RngStream ra(cfg_.seed, {static_cast<std::uint32_t>(m), n, Purpose::swap_accept});
                o.accept = std::log(ra.uniform()) < o.log_alpha;
                if (o.accept) {
                    o.lower = bwd.states.front();
                    o.upper = fwd.states.back();
                }
            } catch (const NumericalError& e) {
                o.degenerate = true;
                spdlog::debug("pair ({}, {}) rejected at iteration {}: {}", m - 1, m, n, e.what());
            }
        });
        for (std::size_t i = 0; i < pairs.size(); ++i) {
            const int m = pairs[i];
            Outcome& o = out[i];
            ++diag_.proposals[m];
            diag_.accept_prob_sum[m] += std::exp(o.log_alpha);
            diag_.nfe.path += o.nfe;
            diag_.nfe.reward += o.reward;
            if (o.degenerate) ++diag_.rejected_degenerate;
            if (!o.accept) continue;
            ++diag_.accepted[m];
            ens.states[m - 1] = std::move(o.lower);
            ens.states[m] = std::move(o.upper);
            std::swap(ens.replica_ids[m - 1], ens.replica_ids[m]);
        }
        if (!is_permutation_of_levels(ens.replica_ids))
            throw NumericalError("invariant", "replica ids are no longer a permutation");
        track_round_trips(ens);
    }

    void local_explore(ReplicaEnsemble<State>& ens, std::uint64_t n) {
        const int M = sys_.num_levels();
        std::vector<std::uint64_t> evals(M + 1, 0);
        parallel_for(M + 1, cfg_.workers, [&](int m) {
            RngStream rng(cfg_.seed, {static_cast<std::uint32_t>(m), n, Purpose::local_move});
            evals[m] = sys_.local_move(ens.states[m], m, rng);
        });
        for (auto e : evals) diag_.nfe.local += e;
    }

    State complete(const State& x, std::uint64_t n) {
        RngStream rng(cfg_.seed, {0, n, Purpose::completion});
        return sys_.complete(x, rng, diag_.nfe.completion);
    }

    void step(ReplicaEnsemble<State>& ens, std::uint64_t n) {
        sys_.begin_iteration(n);
        communication_sweep(ens, n);
        local_explore(ens, n);
        ens.iteration = n;
    }

    // Advances until ens.iteration == until.
    void run(ReplicaEnsemble<State>& ens, std::uint64_t until, const Observer& observer) {
        for (std::uint64_t n = ens.iteration + 1; n <= until; ++n) {
            step(ens, n);
            if (observer) observer(n, ens.replica_ids[0], complete(ens.states[0], n));
        }
    }

    std::vector<Sample<State>> run_collect(ReplicaEnsemble<State>& ens) {
        std::vector<Sample<State>> samples;
        run(ens, cfg_.iterations, [&](std::uint64_t n, int id, const State& x) {
            if (n > cfg_.burn_in) samples.push_back({n, id, x});
        });
        return samples;
    }

private:
    void track_round_trips(const ReplicaEnsemble<State>& ens) {
        const int M = sys_.num_levels();
        if (M == 0) return;
        int& bottom = diag_.replica_phase[ens.replica_ids[0]];
        if (bottom == 2) ++diag_.round_trips;
        bottom = 1;
        int& top = diag_.replica_phase[ens.replica_ids[M]];
        if (top == 1) top = 2;
    }

    System& sys_;
    EngineConfig cfg_;
    Diagnostics diag_;
};

}  // namespace crepe::pt
