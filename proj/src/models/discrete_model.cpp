#include "crepe/models/discrete_model.hpp"

#include "crepe/core/errors.hpp"

#include <cmath>

namespace crepe::models {

ExactDiscreteModel::ExactDiscreteModel(int vocab, int length, std::vector<double> joint_p0)
    : vocab_(vocab), length_(length) {
    if (vocab < 2 || length < 1) throw ConfigError("invalid-model", "discrete model needs vocab >= 2 and length >= 1");
    const int S = vocab - 1;
    double full = 1.0, data = 1.0;
    for (int i = 0; i < length; ++i) {
        full *= vocab;
        data *= S;
        if (full > static_cast<double>(kEnumerationGuard))
            throw ConfigError("enumeration-guard", "V^D exceeds the enumeration guard of 1e6 states");
    }
    if (joint_p0.size() != static_cast<std::size_t>(data)) throw ConfigError("invalid-model", "joint p0 has wrong size");
    double total = 0.0;
    for (double p : joint_p0) {
        if (p < 0.0) throw ConfigError("invalid-model", "negative probability in p0");
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("invalid-model", "p0 must sum to 1");

    marg_.assign(static_cast<std::size_t>(full), 0.0);
    // Each data state contributes to every masking pattern of itself.
    for (std::size_t di = 0; di < joint_p0.size(); ++di) {
        Tokens x(length);
        std::size_t r = di;
        for (int i = 0; i < length; ++i) {
            x[i] = static_cast<int>(r % S);
            r /= S;
        }
        for (std::size_t pattern = 0; pattern < (std::size_t{1} << length); ++pattern) {
            Tokens y = x;
            for (int i = 0; i < length; ++i)
                if (pattern & (std::size_t{1} << i)) y[i] = mask();
            marg_[index(y)] += joint_p0[di];
        }
    }
}

ExactDiscreteModel ExactDiscreteModel::factorized(int vocab, const std::vector<std::vector<double>>& per_position) {
    const int S = vocab - 1;
    const int D = static_cast<int>(per_position.size());
    std::size_t n = 1;
    for (int i = 0; i < D; ++i) {
        if (static_cast<int>(per_position[i].size()) != S) throw ConfigError("invalid-model", "position distribution size");
        n *= S;
    }
    std::vector<double> joint(n);
    for (std::size_t di = 0; di < n; ++di) {
        std::size_t r = di;
        double p = 1.0;
        for (int i = 0; i < D; ++i) {
            p *= per_position[i][r % S];
            r /= S;
        }
        joint[di] = p;
    }
    return ExactDiscreteModel(vocab, D, std::move(joint));
}

std::size_t ExactDiscreteModel::index(const Tokens& x) const {
    std::size_t idx = 0, base = 1;
    for (int i = 0; i < length_; ++i) {
        idx += static_cast<std::size_t>(x[i]) * base;
        base *= vocab_;
    }
    return idx;
}

Tokens ExactDiscreteModel::state(std::size_t idx) const {
    Tokens x(length_);
    for (int i = 0; i < length_; ++i) {
        x[i] = static_cast<int>(idx % vocab_);
        idx /= vocab_;
    }
    return x;
}

double ExactDiscreteModel::log_pt(const Tokens& x, double t) const {
    int masked = 0;
    for (int v : x) masked += (v == mask());
    double lp = std::log(marginal0(x));
    if (masked > 0) lp += masked * std::log(t);
    if (masked < length_) lp += (length_ - masked) * std::log1p(-t);
    return lp;
}

double ExactDiscreteModel::concrete_score(const Tokens& x, const Tokens& y, double t) const {
    if (x == y) return 1.0;
    return std::exp(log_pt(y, t) - log_pt(x, t));
}

void ExactDiscreteModel::unmask_conditionals(const Tokens& x, int pos, std::span<double> out) const {
    const double base = marginal0(x);
    Tokens y = x;
    for (int v = 0; v < vocab_ - 1; ++v) {
        y[pos] = v;
        out[v] = base > 0.0 ? marginal0(y) / base : 0.0;
    }
}

Tokens ExactDiscreteModel::sample0(RngStream& rng) const {
    Tokens x(length_, mask());
    std::vector<double> cond(vocab_ - 1);
    for (int i = 0; i < length_; ++i) {
        unmask_conditionals(x, i, cond);
        x[i] = rng.categorical(cond);
    }
    return x;
}

double exact_discrete_marginal(const ExactDiscreteModel& model, const Tokens& x, double t) { return model.log_pt(x, t); }

double exact_concrete_score(const Tokens& x, int y_token, int pos, double t, const ExactDiscreteModel& model) {
    Tokens y = x;
    y[pos] = y_token;
    return model.concrete_score(x, y, t);
}

}  // namespace crepe::models
