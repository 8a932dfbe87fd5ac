#pragma once

#include "crepe/core/rng.hpp"
#include "crepe/core/types.hpp"

#include <span>
#include <string>
#include <vector>

namespace crepe::models {

// Enumerable masked-diffusion model under linear masking. Tokens 0..V-2 are data
// symbols, V-1 is the mask. p_t(x) = t^m (1-t)^(D-m) P_0(x_U) with U the unmasked set.
class ExactDiscreteModel {
public:
    static constexpr std::size_t kEnumerationGuard = 1000000;

    // joint_p0 indexed by sum_i x_i * S^i over data symbols S = vocab - 1.
    ExactDiscreteModel(int vocab, int length, std::vector<double> joint_p0);
    static ExactDiscreteModel factorized(int vocab, const std::vector<std::vector<double>>& per_position);

    int vocab() const { return vocab_; }
    int mask() const { return vocab_ - 1; }
    int length() const { return length_; }
    std::size_t num_states() const { return marg_.size(); }  // including masked states

    double marginal0(const Tokens& x) const { return marg_[index(x)]; }  // P_0 of the unmasked pattern
    double log_pt(const Tokens& x, double t) const;
    double concrete_score(const Tokens& x, const Tokens& y, double t) const;  // p_t(y) / p_t(x)
    // P_0(x_pos = v | x_U) for every data symbol v, x[pos] masked.
    void unmask_conditionals(const Tokens& x, int pos, std::span<double> out) const;
    Tokens sample0(RngStream& rng) const;

    std::size_t index(const Tokens& x) const;
    Tokens state(std::size_t index) const;

    std::string label;

private:
    int vocab_;
    int length_;
    std::vector<double> marg_;
};

double exact_discrete_marginal(const ExactDiscreteModel& model, const Tokens& x, double t);
double exact_concrete_score(const Tokens& x, int y_token, int pos, double t, const ExactDiscreteModel& model);

}  // namespace crepe::models
