#include "crepe/control/task.hpp"

#include "crepe/core/errors.hpp"

#include <cmath>

namespace crepe::control {

std::string ControlTask::name() const {
    struct V {
        std::string operator()(const Tempering&) const { return "tempering"; }
        std::string operator()(const RewardTilt&) const { return "reward"; }
        std::string operator()(const Composition&) const { return "composition"; }
        std::string operator()(const CfgDebias&) const { return "cfg"; }
    };
    return std::visit(V{}, variant);
}

int ControlTask::required_models() const {
    if (auto* c = std::get_if<Composition>(&variant)) return c->count;
    if (std::holds_alternative<CfgDebias>(variant)) return 2;
    return 1;
}

std::vector<double> ControlTask::proposal_coeffs() const {
    if (auto* t = std::get_if<Tempering>(&variant)) return {t->beta};
    if (auto* c = std::get_if<Composition>(&variant)) return std::vector<double>(c->count, 1.0);
    if (auto* g = std::get_if<CfgDebias>(&variant)) return {1.0 - g->w_prop, g->w_prop};
    return {1.0};
}

std::vector<double> ControlTask::target_coeffs() const {
    if (auto* t = std::get_if<Tempering>(&variant)) return {t->beta};
    if (auto* c = std::get_if<Composition>(&variant)) return std::vector<double>(c->count, 1.0);
    if (auto* g = std::get_if<CfgDebias>(&variant)) return {1.0 - g->w, g->w};
    return {1.0};
}

void ControlTask::validate(int n_models) const {
    if (auto* t = std::get_if<Tempering>(&variant); t && !(t->beta > 0.0))
        throw ConfigError("invalid-config", "tempering needs beta > 0");
    if (auto* c = std::get_if<Composition>(&variant); c && c->count < 2)
        throw ConfigError("invalid-config", "composition needs J >= 2 models");
    if (auto* g = std::get_if<CfgDebias>(&variant); g && (!std::isfinite(g->w) || !std::isfinite(g->w_prop)))
        throw ConfigError("invalid-config", "CFG weights must be finite");
    if (auto* r = std::get_if<RewardTilt>(&variant); r && !r->reward.terminal)
        throw ConfigError("invalid-config", "reward task without a reward");
    if (n_models != required_models())
        throw ConfigError("invalid-config", name() + " needs " + std::to_string(required_models()) + " model(s), got " +
                                                std::to_string(n_models));
}

double log_target_ratio(const ControlTask& task, std::span<const LogRne> rnes, double reward_delta) {
    const auto tau = task.target_coeffs();
    if (rnes.size() != tau.size())
        throw ConfigError("invalid-config", "missing pretrained RNE for task " + task.name());
    double acc = reward_delta;
    for (std::size_t j = 0; j < tau.size(); ++j) {
        if (tau[j] == 0.0) continue;
        if (!rnes[j].finite()) return std::nan("");
        acc -= tau[j] * rnes[j].value;
    }
    return acc;
}

double path_score(double log_target, double log_rq) {
    const double s = log_target + log_rq;
    return std::isfinite(s) ? s : kNegInf;
}

double swap_log_accept(double ltr_fwd, double lrq_fwd, double ltr_bwd, double lrq_bwd) {
    const double a = path_score(ltr_fwd, lrq_fwd), b = path_score(ltr_bwd, lrq_bwd);
    if (a == kNegInf || b == kNegInf) return kNegInf;
    return std::min(0.0, a - b);
}

std::pair<gaussian::SdeProcess, gaussian::SdeProcess> pretrained_pair(const models::ScoreModel& model) {
    const auto noise = model.noise();
    gaussian::SdeProcess fwd{[](const Vec& x, double) { return Vec::Zero(x.size()).eval(); }, noise, Direction::forward};
    gaussian::SdeProcess bwd{[&model](const Vec& x, double t) { return (-model.noise().sigma2(t) * model.score(x, t)).eval(); },
                             noise, Direction::backward};
    return {fwd, bwd};
}

std::pair<gaussian::SdeProcess, gaussian::SdeProcess> proposal_pair(const ControlTask& task,
                                                                    const std::vector<models::ModelPtr>& models,
                                                                    std::function<double(double)> reward_beta) {
    task.validate(static_cast<int>(models.size()));
    const auto coeffs = task.proposal_coeffs();
    const auto noise = models.front()->noise();
    const RewardTilt* rt = task.reward();
    const bool use_grad = rt && rt->gradient_in_proposal && rt->reward.has_gradient() && reward_beta;
    RewardSpec spec = rt ? rt->reward : RewardSpec{};
    gaussian::SdeProcess fwd{[](const Vec& x, double) { return Vec::Zero(x.size()).eval(); }, noise, Direction::forward};
    gaussian::SdeProcess bwd{[models, coeffs, use_grad, spec, reward_beta](const Vec& x, double t) {
                                 Vec g = Vec::Zero(x.size());
                                 for (std::size_t j = 0; j < models.size(); ++j)
                                     if (coeffs[j] != 0.0) g += coeffs[j] * models[j]->score(x, t);
                                 if (use_grad) g += tweedie_reward_gradient(x, t, reward_beta(t), *models[0], spec);
                                 return (-models[0]->noise().sigma2(t) * g).eval();
                             },
                             noise, Direction::backward};
    return {fwd, bwd};
}

void guided_unmask_rates(double t, std::span<const std::vector<double>> conds, std::span<const double> coeffs,
                         std::span<double> out) {
    double csum = 0.0;
    for (double c : coeffs) csum += c;
    // Lambda(t) ((1 - t) / t)^csum = (1 - t)^(csum - 1) / t^csum; finite at t = 1 when csum = 1
    const double tc = csum == 1.0 ? t : discrete::clip_time(t);
    const double base = (csum == 1.0 ? 0.0 : (csum - 1.0) * std::log1p(-tc)) - csum * std::log(tc);
    const int S = static_cast<int>(out.size()) - 1;
    for (int v = 0; v < S; ++v) {
        double lr = base;
        bool zero = false;
        for (std::size_t j = 0; j < coeffs.size(); ++j) {
            if (coeffs[j] == 0.0) continue;
            if (conds[j][v] <= 0.0) {
                zero = true;
                break;
            }
            lr += coeffs[j] * std::log(conds[j][v]);
        }
        out[v] = zero ? 0.0 : std::exp(lr);
    }
    out[S] = 0.0;
}

namespace {

discrete::RateMatrixSpec guided_spec(const std::vector<const models::ExactDiscreteModel*>& models,
                                     std::vector<double> coeffs) {
    discrete::RateMatrixSpec spec;
    spec.role = Direction::backward;
    spec.vocab = models.front()->vocab();
    spec.rates = [models, coeffs](const Tokens& x, int pos, double t, std::span<double> out) {
        const int mask = models.front()->mask();
        std::fill(out.begin(), out.end(), 0.0);
        if (x[pos] != mask) return;
        std::vector<std::vector<double>> conds(models.size(), std::vector<double>(out.size() - 1));
        for (std::size_t j = 0; j < models.size(); ++j)
            if (coeffs[j] != 0.0) models[j]->unmask_conditionals(x, pos, conds[j]);
        guided_unmask_rates(t, conds, coeffs, out);
    };
    return spec;
}

}  // namespace

discrete::RateMatrixSpec pretrained_backward_spec(const models::ExactDiscreteModel& model) {
    return guided_spec({&model}, {1.0});
}

std::pair<discrete::RateMatrixSpec, discrete::RateMatrixSpec> proposal_pair(
    const ControlTask& task, const std::vector<const models::ExactDiscreteModel*>& models) {
    if (task.reward()) throw ConfigError("unsupported", "reward tilting is not supported for discrete models");
    task.validate(static_cast<int>(models.size()));
    return {discrete::forward_masking_spec(models.front()->vocab(), models.front()->mask()),
            guided_spec(models, task.proposal_coeffs())};
}

double log_pi_discrete(const std::vector<const models::ExactDiscreteModel*>& models, std::span<const double> tau,
                       const Tokens& x, double t) {
    const auto& m0 = *models.front();
    int masked = 0;
    for (int v : x) masked += (v == m0.mask());
    double tsum = 0.0, acc = 0.0;
    for (std::size_t j = 0; j < models.size(); ++j) {
        if (tau[j] == 0.0) continue;
        tsum += tau[j];
        const double p = models[j]->marginal0(x);
        if (p <= 0.0) return tau[j] > 0.0 ? kNegInf : std::nan("");
        acc += tau[j] * std::log(p);
    }
    if (masked > 0) acc += tsum * masked * std::log(t);
    if (masked < m0.length()) acc += tsum * (m0.length() - masked) * std::log1p(-t);
    return acc;
}

double log_pi_ratio_discrete(const std::vector<const models::ExactDiscreteModel*>& models, std::span<const double> tau,
                             const Tokens& x, const Tokens& y, double t) {
    if (x == y) return 0.0;
    return log_pi_discrete(models, tau, y, t) - log_pi_discrete(models, tau, x, t);
}

}  // namespace crepe::control
