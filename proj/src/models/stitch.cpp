#include "crepe/models/stitch.hpp"

#include "crepe/core/errors.hpp"

namespace crepe::models {

StitchWeights StitchWeights::defaults_for(int segments) {
    StitchWeights w;
    w.lambda_o = w.lambda_p = w.lambda_i = 100.0 * segments;
    return w;
}

void StitchWeights::validate() const {
    for (double v : {lambda_o, lambda_p, lambda_n, lambda_i, lambda_l1, lambda_l2, tau})
        if (!(v > 0.0)) throw ConfigError("invalid-config", "stitch weights must be positive");
}

}  // namespace crepe::models
