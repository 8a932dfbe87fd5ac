#include "crepe/pt/gaussian_system.hpp"

#include "crepe/core/errors.hpp"
#include "crepe/core/format.hpp"

#include <cmath>

namespace crepe::pt {

GaussianSystem::GaussianSystem(GaussianSystemConfig cfg) : cfg_(std::move(cfg)), task_(cfg_.task) {
    if (cfg_.models.empty()) throw ConfigError("invalid-config", "no models given");
    task_.validate(static_cast<int>(cfg_.models.size()));
    for (const auto& m : cfg_.models)
        if (m->dim() != cfg_.models.front()->dim() || !(m->noise() == cfg_.models.front()->noise()))
            throw ConfigError("invalid-config", "base models must share dimension and noise schedule");
    if (cfg_.local_move == LocalMove::ctmc_mh) throw ConfigError("invalid-config", "ctmc_mh local move needs a discrete model");
    if (!cfg_.events.empty() && !task_.reward())
        throw ConfigError("invalid-config", "online events may only change reward terms");
    for (std::size_t i = 1; i < cfg_.events.size(); ++i)
        if (cfg_.events[i].iteration < cfg_.events[i - 1].iteration)
            throw ConfigError("invalid-config", "online events must be sorted by iteration");
    const auto& noise = cfg_.models.front()->noise();
    if (!(noise.sigma2(cfg_.grid.t_min()) > 0.0)) throw ConfigError("invalid-config", "sigma vanishes on the PT interval");
    prop_c_ = task_.proposal_coeffs();
    tau_ = task_.target_coeffs();
    ref_.mean0 = cfg_.models.front()->data_mean();
    ref_.var0 = cfg_.models.front()->data_iso_var();
    ref_.noise = noise;
}

void GaussianSystem::begin_iteration(std::uint64_t n) {
    std::size_t idx = 0;
    for (std::size_t i = 0; i < cfg_.events.size(); ++i)
        if (cfg_.events[i].iteration <= n) idx = i + 1;
    if (idx == active_event_) return;
    auto& rt = std::get<control::RewardTilt>(task_.variant);
    const auto* base = cfg_.task.reward();
    rt.reward.terminal = idx == 0 ? base->reward.terminal : cfg_.events[idx - 1].reward;
    active_event_ = idx;
}

double GaussianSystem::reward_beta(double t) const {
    const auto* rt = task_.reward();
    return rt ? rt->schedule.beta_at_time(t, cfg_.grid) : 0.0;
}

ScoreBundle GaussianSystem::bundle(const Vec& x, double t) const {
    ScoreBundle b;
    b.scores.resize(cfg_.models.size());
    for (std::size_t j = 0; j < cfg_.models.size(); ++j)
        if (prop_c_[j] != 0.0 || tau_[j] != 0.0) b.scores[j] = cfg_.models[j]->score(x, t);
    const auto* rt = task_.reward();
    if (rt && rt->gradient_in_proposal && rt->reward.has_gradient())
        b.reward_grad = control::tweedie_reward_gradient(x, t, reward_beta(t), *cfg_.models.front(), rt->reward);
    return b;
}

Vec GaussianSystem::guided_direction(const ScoreBundle& b) const {
    Vec g = Vec::Zero(cfg_.models.front()->dim());
    for (std::size_t j = 0; j < b.scores.size(); ++j)
        if (prop_c_[j] != 0.0) g += prop_c_[j] * b.scores[j];
    if (b.reward_grad.size() > 0) g += b.reward_grad;
    return g;
}

GaussianSystem::State GaussianSystem::sample_reference(RngStream& rng) const {
    const auto [m, v] = ref_.moments(cfg_.grid.t_max());
    Vec eps(m.size());
    rng.fill_normal(eps);
    return m + std::sqrt(v) * eps;
}

double GaussianSystem::log_pi(const State& x, double t) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < cfg_.models.size(); ++j)
        if (tau_[j] != 0.0) acc += tau_[j] * cfg_.models[j]->log_pt(x, t);
    if (const auto* rt = task_.reward()) acc += control::tweedie_reward(x, t, reward_beta(t), *cfg_.models.front(), rt->reward);
    return acc;
}

double GaussianSystem::log_reference_weight(const State& x) const {
    const double tM = cfg_.grid.t_max();
    return log_pi(x, tM) - ref_.log_density(x, tM);
}

GaussianSystem::Path GaussianSystem::simulate(const State& start, int m, Direction dir, RngStream& rng) const {
    if (!start.allFinite()) throw NumericalError("non-finite", "non-finite state at level " + std::to_string(m));
    const auto seg = cfg_.grid.segment(m);
    const int K = static_cast<int>(seg.size()) - 1;
    const auto& noise = cfg_.models.front()->noise();
    Path p;
    p.states.resize(K + 1);
    p.bundles.resize(K + 1);
    Vec eps(start.size());
    if (dir == Direction::forward) {
        p.states[0] = start;
        for (int k = 1; k <= K; ++k) {
            const double dt = seg[k] - seg[k - 1];
            rng.fill_normal(eps);
            p.states[k] = p.states[k - 1] + noise.sigma(seg[k - 1]) * std::sqrt(dt) * eps;
        }
    } else {
        p.states[K] = start;
        for (int k = K; k >= 1; --k) {
            const double dt = seg[k] - seg[k - 1];
            p.bundles[k] = bundle(p.states[k], seg[k]);
            ++p.nfe;
            rng.fill_normal(eps);
            p.states[k - 1] = p.states[k] + dt * noise.sigma2(seg[k]) * guided_direction(p.bundles[k]) +
                              noise.sigma(seg[k]) * std::sqrt(dt) * eps;
        }
    }
    for (const auto& s : p.states)
        if (!s.allFinite()) throw NumericalError("non-finite", "non-finite state on path at level " + std::to_string(m));
    return p;
}

double GaussianSystem::endpoint_reward(const Vec& x, int level, std::uint64_t& evals) const {
    const auto* rt = task_.reward();
    const double beta = rt->schedule.beta_of_level(level, num_levels());
    if (beta == 0.0) return 0.0;
    ++evals;
    return control::tweedie_reward(x, cfg_.grid.level_time(level), beta, *cfg_.models.front(), rt->reward);
}

double GaussianSystem::score_path(Path& path, int m) const {
    const auto seg = cfg_.grid.segment(m);
    const int K = static_cast<int>(seg.size()) - 1;
    const auto& noise = cfg_.models.front()->noise();
    if (static_cast<int>(path.states.size()) != K + 1) throw ConfigError("shape", "path length does not match the level");
    path.bundles.resize(K + 1);
    for (int k = 1; k <= K; ++k) {
        if (path.bundles[k].scores.empty()) {
            path.bundles[k] = bundle(path.states[k], seg[k]);
            ++path.nfe;
        }
    }
    const std::size_t dim = path.states.front().size();
    const std::vector<Vec> zero(K + 1, Vec::Zero(dim));
    std::vector<Vec> drift(K + 1, Vec::Zero(dim));
    auto rne = [&](const std::vector<Vec>& bwd) {
        return cfg_.use_reference
                   ? gaussian::log_rne_stabilized_from_drifts(seg, path.states, zero, bwd, noise, ref_)
                   : gaussian::log_rne_from_drifts(seg, path.states, zero, bwd, noise);
    };

    std::vector<LogRne> rnes(cfg_.models.size());
    for (std::size_t j = 0; j < cfg_.models.size(); ++j) {
        rnes[j].tag = ProcessTag::pretrained;
        rnes[j].model = static_cast<int>(j);
        if (tau_[j] == 0.0) continue;
        for (int k = 1; k <= K; ++k) drift[k] = -noise.sigma2(seg[k]) * path.bundles[k].scores[j];
        rnes[j].value = rne(drift);
    }
    for (int k = 1; k <= K; ++k) drift[k] = -noise.sigma2(seg[k]) * guided_direction(path.bundles[k]);
    const double lrq = rne(drift);

    double reward_delta = 0.0;
    if (task_.reward())
        reward_delta = endpoint_reward(path.states.back(), m, path.reward_evals) -
                       endpoint_reward(path.states.front(), m - 1, path.reward_evals);
    const double ltr = control::log_target_ratio(task_, rnes, reward_delta);
    return control::path_score(ltr, lrq);
}

GaussianSystem::State GaussianSystem::complete(const State& x, RngStream& rng, std::uint64_t& nfe) const {
    const auto part = cfg_.grid.truncated_part();
    const auto& noise = cfg_.models.front()->noise();
    Vec cur = x;
    Vec eps(x.size());
    for (int k = static_cast<int>(part.size()) - 1; k >= 1; --k) {
        const double dt = part[k] - part[k - 1];
        const ScoreBundle b = bundle(cur, part[k]);
        ++nfe;
        rng.fill_normal(eps);
        cur = cur + dt * noise.sigma2(part[k]) * guided_direction(b) + noise.sigma(part[k]) * std::sqrt(dt) * eps;
    }
    return cur;
}

std::uint64_t GaussianSystem::local_move(State& x, int m, RngStream& rng) const {
    const int M = num_levels();
    const double t = cfg_.grid.level_time(m);
    if (m == M && cfg_.resample_top) {
        const Vec y = sample_reference(rng);
        const double log_acc = log_pi(y, t) - log_pi(x, t) + ref_.log_density(x, t) - ref_.log_density(y, t);
        if (std::log(rng.uniform()) < log_acc) x = y;
        return 2;
    }
    if (cfg_.local_move != LocalMove::ula) return 0;
    const int idx = cfg_.grid.level_index(m);
    const auto& times = cfg_.grid.times;
    const double dt = idx > 0 ? times[idx] - times[idx - 1] : times[1] - times[0];
    const double step = 0.5 * cfg_.models.front()->noise().sigma2(t) * dt;
    if (step <= 0.0) return 0;
    Vec grad = Vec::Zero(x.size());
    for (std::size_t j = 0; j < cfg_.models.size(); ++j)
        if (tau_[j] != 0.0) grad += tau_[j] * cfg_.models[j]->score(x, t);
    const auto* rt = task_.reward();
    if (rt && rt->reward.has_gradient())
        grad += control::tweedie_reward_gradient(x, t, rt->schedule.beta_of_level(m, M), *cfg_.models.front(), rt->reward);
    Vec xi(x.size());
    rng.fill_normal(xi);
    Vec y = x + step * grad + std::sqrt(2.0 * step) * xi;
    if (y.allFinite()) x = std::move(y);
    return 1;
}

nlohmann::json GaussianSystem::state_to_json(const State& x) const {
    return std::vector<double>(x.data(), x.data() + x.size());
}

GaussianSystem::State GaussianSystem::state_from_json(const nlohmann::json& j) const {
    const auto v = j.get<std::vector<double>>();
    if (static_cast<int>(v.size()) != cfg_.models.front()->dim()) throw IoError("corrupt-checkpoint", "state dimension mismatch");
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

void GaussianSystem::write_header(std::ostream& os) const {
    os << "iteration,replica_id";
    for (int i = 0; i < cfg_.models.front()->dim(); ++i) os << ",x" << i;
    os << '\n';
}

void GaussianSystem::write_state(std::ostream& os, const State& x) const {
    for (Eigen::Index i = 0; i < x.size(); ++i) os << ',' << format_double(x[i]);
}

}  // namespace crepe::pt
