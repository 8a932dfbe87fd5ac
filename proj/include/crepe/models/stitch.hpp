#pragma once

#include "crepe/core/types.hpp"

#include <optional>

namespace crepe::models {

struct StitchWeights {
    double lambda_o = 300.0;
    double lambda_p = 300.0;
    double lambda_n = 100.0;
    double lambda_i = 300.0;
    double lambda_l1 = 10.0;
    double lambda_l2 = 1.0;
    double tau = 10.0;

    static StitchWeights defaults_for(int segments);
    void validate() const;
};

struct StitchAnchors {
    Eigen::Vector2d origin;
    Eigen::Vector2d target;
    std::optional<Eigen::Vector2d> intermediate;
};

}  // namespace crepe::models
