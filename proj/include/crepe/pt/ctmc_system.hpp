#pragma once

#include "crepe/control/task.hpp"
#include "crepe/core/rng.hpp"
#include "crepe/core/time_grid.hpp"
#include "crepe/discrete/ctmc.hpp"
#include "crepe/models/discrete_model.hpp"
#include "crepe/pt/gaussian_system.hpp"

#include <json.hpp>

#include <memory>
#include <ostream>
#include <vector>

namespace crepe::pt {

enum class MhProposal { uniform, masking };

// P_0^j(v | x_U) for every masked position of one state.
struct CtmcBundle {
    std::vector<std::vector<std::vector<double>>> conds;  // [model][position][symbol]
};

struct CtmcPath {
    std::vector<Tokens> states;
    std::vector<CtmcBundle> bundles;
    std::uint64_t nfe = 0;
    std::uint64_t reward_evals = 0;
};

struct CtmcSystemConfig {
    control::ControlTask task;
    std::vector<std::shared_ptr<const models::ExactDiscreteModel>> models;
    TimeGrid grid;
    discrete::KernelOptions kernel;
    LocalMove local_move = LocalMove::off;
    MhProposal mh_proposal = MhProposal::uniform;
    bool resample_top = false;
};

class CtmcSystem {
public:
    using State = Tokens;
    using Path = CtmcPath;

    explicit CtmcSystem(CtmcSystemConfig cfg);

    const TimeGrid& grid() const { return cfg_.grid; }
    int num_levels() const { return cfg_.grid.num_levels(); }
    const control::ControlTask& task() const { return cfg_.task; }
    const CtmcSystemConfig& config() const { return cfg_; }
    std::vector<const models::ExactDiscreteModel*> model_ptrs() const;

    void begin_iteration(std::uint64_t) {}

    State sample_reference(RngStream&) const;
    double log_reference_weight(const State&) const { return 0.0; }

    Path simulate(const State& start, int m, Direction dir, RngStream& rng) const;
    double score_path(Path& path, int m) const;
    State complete(const State& x, RngStream& rng, std::uint64_t& nfe) const;
    std::uint64_t local_move(State& x, int m, RngStream& rng) const;

    double log_pi(const State& x, double t) const;

    CtmcBundle bundle(const Tokens& x) const;
    // Kernel rows at state x, time t, step dt.
    void backward_row(const Tokens& x, const CtmcBundle& b, int pos, std::span<const double> coeffs, double t,
                      double dt, std::span<double> row) const;
    void forward_row(const Tokens& x, int pos, double t, double dt, std::span<double> row) const;
    const std::vector<double>& proposal_coeffs() const { return prop_c_; }
    const std::vector<double>& target_coeffs() const { return tau_; }

    nlohmann::json state_to_json(const State& x) const { return x; }
    State state_from_json(const nlohmann::json& j) const;
    void write_header(std::ostream& os) const;
    void write_state(std::ostream& os, const State& x) const;

private:
    State step_backward(const Tokens& x, double t, double dt, RngStream& rng, CtmcBundle& b) const;

    CtmcSystemConfig cfg_;
    std::vector<double> prop_c_, tau_;
    int vocab_, mask_, length_;
};

}  // namespace crepe::pt
