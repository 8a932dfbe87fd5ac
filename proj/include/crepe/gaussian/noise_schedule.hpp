#pragma once

#include <cmath>

namespace crepe::gaussian {

// Isotropic diffusion coefficient sigma_t with variance-exploding marginal
// variance var(t) = integral_0^t sigma_s^2 ds.
struct NoiseSchedule {
    enum class Kind { edm, constant };
    Kind kind = Kind::edm;
    double c = 1.0;  // sigma^2 for the constant kind

    static NoiseSchedule edm() { return {Kind::edm, 1.0}; }
    static NoiseSchedule constant(double sigma) { return {Kind::constant, sigma * sigma}; }

    double sigma2(double t) const { return kind == Kind::edm ? 2.0 * t : c; }
    double sigma(double t) const { return std::sqrt(sigma2(t)); }
    double var(double t) const { return kind == Kind::edm ? t * t : c * t; }

    bool operator==(const NoiseSchedule&) const = default;
};

}  // namespace crepe::gaussian
