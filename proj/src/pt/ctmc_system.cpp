#include "crepe/pt/ctmc_system.hpp"

#include "crepe/core/errors.hpp"

#include <cmath>

namespace crepe::pt {

CtmcSystem::CtmcSystem(CtmcSystemConfig cfg) : cfg_(std::move(cfg)) {
    if (cfg_.models.empty()) throw ConfigError("invalid-config", "no models given");
    if (cfg_.task.reward()) throw ConfigError("unsupported", "reward tilting is not supported for discrete models");
    cfg_.task.validate(static_cast<int>(cfg_.models.size()));
    const auto& m0 = *cfg_.models.front();
    for (const auto& m : cfg_.models)
        if (m->vocab() != m0.vocab() || m->length() != m0.length())
            throw ConfigError("invalid-config", "discrete models must share vocab and length");
    if (cfg_.grid.t_max() != 1.0) throw ConfigError("invalid-schedule", "masked diffusion grids must end at t = 1");
    if (!(cfg_.grid.t_min() > 0.0)) throw ConfigError("invalid-schedule", "masked diffusion grids need t_min > 0");
    if (cfg_.local_move == LocalMove::ula) throw ConfigError("invalid-config", "ula local move needs a continuous model");
    prop_c_ = cfg_.task.proposal_coeffs();
    tau_ = cfg_.task.target_coeffs();
    vocab_ = m0.vocab();
    mask_ = m0.mask();
    length_ = m0.length();
}

std::vector<const models::ExactDiscreteModel*> CtmcSystem::model_ptrs() const {
    std::vector<const models::ExactDiscreteModel*> out;
    for (const auto& m : cfg_.models) out.push_back(m.get());
    return out;
}

CtmcSystem::State CtmcSystem::sample_reference(RngStream&) const { return Tokens(length_, mask_); }

CtmcBundle CtmcSystem::bundle(const Tokens& x) const {
    CtmcBundle b;
    b.conds.resize(cfg_.models.size());
    for (std::size_t j = 0; j < cfg_.models.size(); ++j) {
        if (prop_c_[j] == 0.0 && tau_[j] == 0.0) continue;
        b.conds[j].resize(length_);
        for (int i = 0; i < length_; ++i) {
            if (x[i] != mask_) continue;
            b.conds[j][i].resize(vocab_ - 1);
            cfg_.models[j]->unmask_conditionals(x, i, b.conds[j][i]);
        }
    }
    return b;
}

void CtmcSystem::backward_row(const Tokens& x, const CtmcBundle& b, int pos, std::span<const double> coeffs, double t,
                              double dt, std::span<double> row) const {
    std::fill(row.begin(), row.end(), 0.0);
    if (x[pos] == mask_) {
        std::vector<std::vector<double>> conds(cfg_.models.size());
        for (std::size_t j = 0; j < cfg_.models.size(); ++j)
            if (coeffs[j] != 0.0) conds[j] = b.conds[j][pos];
        control::guided_unmask_rates(t, conds, coeffs, row);
    }
    discrete::rates_to_kernel(row, x[pos], dt, cfg_.kernel);
}

void CtmcSystem::forward_row(const Tokens& x, int pos, double t, double dt, std::span<double> row) const {
    std::fill(row.begin(), row.end(), 0.0);
    if (x[pos] != mask_) row[mask_] = discrete::masking_rate(t);
    discrete::rates_to_kernel(row, x[pos], dt, cfg_.kernel);
}

CtmcSystem::State CtmcSystem::step_backward(const Tokens& x, double t, double dt, RngStream& rng, CtmcBundle& b) const {
    b = bundle(x);
    Tokens y = x;
    std::vector<double> row(vocab_);
    for (int i = 0; i < length_; ++i) {
        backward_row(x, b, i, prop_c_, t, dt, row);
        y[i] = rng.categorical(row);
    }
    return y;
}

CtmcSystem::Path CtmcSystem::simulate(const State& start, int m, Direction dir, RngStream& rng) const {
    const auto seg = cfg_.grid.segment(m);
    const int K = static_cast<int>(seg.size()) - 1;
    Path p;
    p.states.resize(K + 1);
    p.bundles.resize(K + 1);
    std::vector<double> row(vocab_);
    if (dir == Direction::forward) {
        p.states[0] = start;
        for (int k = 1; k <= K; ++k) {
            const double dt = seg[k] - seg[k - 1];
            Tokens y = p.states[k - 1];
            for (int i = 0; i < length_; ++i) {
                forward_row(p.states[k - 1], i, seg[k - 1], dt, row);
                y[i] = rng.categorical(row);
            }
            p.states[k] = std::move(y);
        }
    } else {
        p.states[K] = start;
        for (int k = K; k >= 1; --k) {
            p.states[k - 1] = step_backward(p.states[k], seg[k], seg[k] - seg[k - 1], rng, p.bundles[k]);
            ++p.nfe;
        }
    }
    return p;
}

double CtmcSystem::score_path(Path& path, int m) const {
    const auto seg = cfg_.grid.segment(m);
    const int K = static_cast<int>(seg.size()) - 1;
    if (static_cast<int>(path.states.size()) != K + 1) throw ConfigError("shape", "path length does not match the level");
    path.bundles.resize(K + 1);
    for (int k = 1; k <= K; ++k) {
        if (path.bundles[k].conds.empty()) {
            path.bundles[k] = bundle(path.states[k]);
            ++path.nfe;
        }
    }
    const std::size_t J = cfg_.models.size();
    std::vector<double> row(vocab_);
    double log_f = 0.0, log_bq = 0.0;
    std::vector<double> log_bp(J, 0.0);
    std::vector<double> unit(J, 0.0);
    for (int k = 1; k <= K; ++k) {
        const double dt = seg[k] - seg[k - 1];
        const Tokens& a = path.states[k - 1];
        const Tokens& b = path.states[k];
        for (int i = 0; i < length_; ++i) {
            forward_row(a, i, seg[k - 1], dt, row);
            log_f += std::log(row[b[i]]);
            backward_row(b, path.bundles[k], i, prop_c_, seg[k], dt, row);
            log_bq += std::log(row[a[i]]);
            for (std::size_t j = 0; j < J; ++j) {
                if (tau_[j] == 0.0) continue;
                std::fill(unit.begin(), unit.end(), 0.0);
                unit[j] = 1.0;
                backward_row(b, path.bundles[k], i, unit, seg[k], dt, row);
                log_bp[j] += std::log(row[a[i]]);
            }
        }
    }
    auto finite_or_neginf = [](double v) { return std::isnan(v) ? kNegInf : v; };
    std::vector<LogRne> rnes(J);
    for (std::size_t j = 0; j < J; ++j)
        rnes[j] = {finite_or_neginf(log_bp[j] - log_f), ProcessTag::pretrained, static_cast<int>(j)};
    const double lrq = finite_or_neginf(log_bq - log_f);
    const double ltr = control::log_target_ratio(cfg_.task, rnes, 0.0);
    return control::path_score(ltr, lrq);
}

CtmcSystem::State CtmcSystem::complete(const State& x, RngStream& rng, std::uint64_t& nfe) const {
    const auto part = cfg_.grid.truncated_part();
    Tokens cur = x;
    CtmcBundle b;
    for (int k = static_cast<int>(part.size()) - 1; k >= 1; --k) {
        cur = step_backward(cur, part[k], part[k] - part[k - 1], rng, b);
        ++nfe;
    }
    return cur;
}

double CtmcSystem::log_pi(const State& x, double t) const {
    return control::log_pi_discrete(model_ptrs(), tau_, x, t);
}

std::uint64_t CtmcSystem::local_move(State& x, int m, RngStream& rng) const {
    const int M = num_levels();
    if (m == M && cfg_.resample_top) {
        x = Tokens(length_, mask_);
        return 0;
    }
    if (cfg_.local_move != LocalMove::ctmc_mh) return 0;
    const double t = cfg_.grid.level_time(m);
    const auto ptrs = model_ptrs();
    std::uint64_t evals = 0;
    for (int i = 0; i < length_; ++i) {
        Tokens y = x;
        const double u = rng.uniform();
        if (cfg_.mh_proposal == MhProposal::uniform) {
            int v = static_cast<int>(u * (vocab_ - 1));
            if (v >= x[i]) ++v;
            y[i] = v;
        } else if (x[i] == mask_) {
            y[i] = static_cast<int>(u * (vocab_ - 1));
        } else if (u < 1.0 / (vocab_ - 1)) {
            y[i] = mask_;
        } else {
            continue;
        }
        ++evals;
        const double lr = control::log_pi_ratio_discrete(ptrs, tau_, x, y, t);
        if (std::log(rng.uniform()) < lr) x = std::move(y);
    }
    return evals;
}

CtmcSystem::State CtmcSystem::state_from_json(const nlohmann::json& j) const {
    auto x = j.get<Tokens>();
    if (static_cast<int>(x.size()) != length_) throw IoError("corrupt-checkpoint", "token state length mismatch");
    for (int v : x)
        if (v < 0 || v >= vocab_) throw IoError("corrupt-checkpoint", "token index out of range");
    return x;
}

void CtmcSystem::write_header(std::ostream& os) const {
    os << "iteration,replica_id";
    for (int i = 0; i < length_; ++i) os << ",tok" << i;
    os << '\n';
}

void CtmcSystem::write_state(std::ostream& os, const State& x) const {
    for (int v : x) os << ',' << v;
}

}  // namespace crepe::pt
