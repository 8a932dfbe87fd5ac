#pragma once

#include "crepe/core/rng.hpp"
#include "crepe/core/types.hpp"
#include "crepe/gaussian/noise_schedule.hpp"

#include <memory>
#include <string>

namespace crepe::models {

using gaussian::NoiseSchedule;

// Variance-exploding diffusion over a closed-form data density p_0:
// forward drift f = 0, marginal p_t = p_0 convolved with N(0, var(t) I).
class ScoreModel {
public:
    virtual ~ScoreModel() = default;

    virtual int dim() const = 0;
    virtual const NoiseSchedule& noise() const = 0;
    virtual double log_pt(const Vec& x, double t) const = 0;
    virtual Vec score(const Vec& x, double t) const = 0;
    // Hessian of log p_t applied to v.
    virtual Vec hvp(const Vec& x, double t, const Vec& v) const = 0;
    virtual Vec data_mean() const = 0;
    virtual double data_iso_var() const = 0;  // trace(Cov[x_0]) / dim
    virtual Vec sample0(RngStream& rng) const = 0;

    // Tweedie: E[x_0 | x_t = x].
    Vec denoise(const Vec& x, double t) const { return x + noise().var(t) * score(x, t); }

    std::string label;
};

using ModelPtr = std::shared_ptr<const ScoreModel>;

}  // namespace crepe::models
