#pragma once

#include "crepe/control/reward.hpp"
#include "crepe/discrete/ctmc.hpp"
#include "crepe/gaussian/sde.hpp"
#include "crepe/models/discrete_model.hpp"
#include "crepe/models/score_model.hpp"

#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace crepe::control {

struct Tempering {
    double beta = 1.0;
};

struct RewardTilt {
    RewardSpec reward;
    RewardSchedule schedule;
    bool gradient_in_proposal = true;  // otherwise the proposal is score-only
};

struct Composition {
    int count = 2;
};

// Target p^(1-w) p(.|c)^w; model 0 is unconditional, model 1 conditional.
struct CfgDebias {
    double w = 1.0;
    double w_prop = 1.0;
};

struct ControlTask {
    std::variant<Tempering, RewardTilt, Composition, CfgDebias> variant;

    std::string name() const;
    int required_models() const;
    // Coefficients c_j of the base scores in the guided (denoising) proposal.
    std::vector<double> proposal_coeffs() const;
    // Exponents tau_j with pi_t proportional to prod_j (p_t^j)^tau_j (times exp r_t).
    std::vector<double> target_coeffs() const;
    const RewardTilt* reward() const { return std::get_if<RewardTilt>(&variant); }
    void validate(int n_models) const;
};

// log(pi_{t'}(x_{t'}) / pi_t(x_t)) from pretrained RNEs on one path plus reward endpoints.
double log_target_ratio(const ControlTask& task, std::span<const LogRne> rnes, double reward_delta = 0.0);

// Per-path term log pi-ratio + log R^Q; -inf for any non-finite input.
double path_score(double log_target, double log_rq);

// min(0, [ltr + log R^Q](fwd path) - [ltr + log R^Q](bwd path)).
double swap_log_accept(double ltr_fwd, double lrq_fwd, double ltr_bwd, double lrq_bwd);

// Continuous proposal: forward = noising f, backward = guided denoising drift.
// reward_beta(t) gives the schedule value used for the reward gradient at sub-time t.
std::pair<gaussian::SdeProcess, gaussian::SdeProcess> proposal_pair(
    const ControlTask& task, const std::vector<models::ModelPtr>& models,
    std::function<double(double)> reward_beta = nullptr);

// Pretrained pair (f, g) of model j.
std::pair<gaussian::SdeProcess, gaussian::SdeProcess> pretrained_pair(const models::ScoreModel& model);

// Backward unmasking rates Lambda(y, x) prod_j (p_t^j(y) / p_t^j(x))^c_j for a masked position,
// given P_0^j(v | x_U) per model; the time is clipped only when sum_j c_j != 1.
void guided_unmask_rates(double t, std::span<const std::vector<double>> conds, std::span<const double> coeffs,
                         std::span<double> out);

std::pair<discrete::RateMatrixSpec, discrete::RateMatrixSpec> proposal_pair(
    const ControlTask& task, const std::vector<const models::ExactDiscreteModel*>& models);
discrete::RateMatrixSpec pretrained_backward_spec(const models::ExactDiscreteModel& model);

// Unnormalized log pi_t(x) = sum_j tau_j log p_t^j(x), with the shared masking factor kept finite.
double log_pi_discrete(const std::vector<const models::ExactDiscreteModel*>& models, std::span<const double> tau,
                       const Tokens& x, double t);
double log_pi_ratio_discrete(const std::vector<const models::ExactDiscreteModel*>& models, std::span<const double> tau,
                             const Tokens& x, const Tokens& y, double t);

}  // namespace crepe::control
