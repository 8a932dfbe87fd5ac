#pragma once

#include "crepe/control/task.hpp"
#include "crepe/core/rng.hpp"
#include "crepe/core/time_grid.hpp"
#include "crepe/gaussian/reference.hpp"
#include "crepe/models/score_model.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <ostream>
#include <vector>

namespace crepe::pt {

enum class LocalMove { off, ula, ctmc_mh };

struct RewardEvent {
    std::uint64_t iteration = 0;
    std::shared_ptr<const control::TerminalReward> reward;
};

// Scores of every base model (plus the reward gradient) at one path state.
struct ScoreBundle {
    std::vector<Vec> scores;
    Vec reward_grad;
};

struct GaussianPath {
    std::vector<Vec> states;           // ascending in time
    std::vector<ScoreBundle> bundles;  // bundles[k] valid for k >= 1 once evaluated
    std::uint64_t nfe = 0;
    std::uint64_t reward_evals = 0;
};

struct GaussianSystemConfig {
    control::ControlTask task;
    std::vector<models::ModelPtr> models;
    TimeGrid grid;
    bool use_reference = false;
    LocalMove local_move = LocalMove::off;
    bool resample_top = false;
    std::vector<RewardEvent> events;
};

class GaussianSystem {
public:
    using State = Vec;
    using Path = GaussianPath;

    explicit GaussianSystem(GaussianSystemConfig cfg);

    const TimeGrid& grid() const { return cfg_.grid; }
    int num_levels() const { return cfg_.grid.num_levels(); }
    const control::ControlTask& task() const { return task_; }
    const GaussianSystemConfig& config() const { return cfg_; }
    const gaussian::ReferenceProcess& reference() const { return ref_; }

    // Applies the latest reward event scheduled at or before iteration n.
    void begin_iteration(std::uint64_t n);

    State sample_reference(RngStream& rng) const;
    // log pi_{t_M}(x) - log gamma_{t_M}(x), up to a constant.
    double log_reference_weight(const State& x) const;

    // Proposal path between levels m-1 and m: forward starts at level m-1, backward at level m.
    Path simulate(const State& start, int m, Direction dir, RngStream& rng) const;
    // log pi-ratio + log R^Q over the path (ascending), -inf when degenerate.
    double score_path(Path& path, int m) const;
    // Continues the backward proposal over the truncated part [t_min, t_trunc].
    State complete(const State& x, RngStream& rng, std::uint64_t& nfe) const;
    // Returns number of score evaluations used.
    std::uint64_t local_move(State& x, int m, RngStream& rng) const;

    // Exact unnormalized log pi_t(x) for a level time t (reward schedule at that time).
    double log_pi(const State& x, double t) const;
    double reward_beta(double t) const;

    ScoreBundle bundle(const Vec& x, double t) const;
    Vec guided_direction(const ScoreBundle& b) const;  // sum_j c_j s_j + grad r_t

    nlohmann::json state_to_json(const State& x) const;
    State state_from_json(const nlohmann::json& j) const;
    void write_header(std::ostream& os) const;
    void write_state(std::ostream& os, const State& x) const;

private:
    double endpoint_reward(const Vec& x, int level, std::uint64_t& evals) const;

    GaussianSystemConfig cfg_;
    control::ControlTask task_;
    std::vector<double> prop_c_, tau_;
    gaussian::ReferenceProcess ref_;
    std::size_t active_event_ = 0;  // 0 = none applied, otherwise index + 1
};

}  // namespace crepe::pt
