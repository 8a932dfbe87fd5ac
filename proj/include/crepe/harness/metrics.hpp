#pragma once

#include "crepe/core/types.hpp"
#include "crepe/models/stitch.hpp"

#include <functional>
#include <span>
#include <vector>

namespace crepe::harness {

// 0.5 * sum |p - q| after normalizing both.
double tvd_probs(std::span<const double> p, std::span<const double> q);

// Counts over `bins` equal cells on [lo, hi] plus one trailing overflow cell for anything outside.
std::vector<double> histogram(std::span<const double> samples, int bins, double lo, double hi,
                              std::span<const double> weights = {});
// Mass of an unnormalized density in each cell (Simpson, 32 panels per cell), overflow cell = 0.
std::vector<double> binned_density(const std::function<double(double)>& density, int bins, double lo, double hi);
double tvd_histogram(std::span<const double> samples, const std::function<double(double)>& density, int bins, double lo,
                     double hi, std::span<const double> weights = {});

// Exact W2 between two empirical measures on the line via the quantile coupling.
double w2_1d(std::span<const double> a, std::span<const double> b);
// n equally spaced quantiles (i + 1/2)/n of an unnormalized density tabulated on [lo, hi].
std::vector<double> density_quantiles(const std::function<double(double)>& density, double lo, double hi, int n);

struct ModeOccupancy {
    double below = 0.0;
    double above = 0.0;
};
ModeOccupancy mode_occupancy(std::span<const double> samples, double split = 0.0, std::span<const double> weights = {});

struct StitchOutcome {
    bool success = false;       // start near O, end near P, every seam closed
    bool pass_through = false;  // some point near the intermediate anchor
    double max_gap = 0.0;
};
StitchOutcome stitch_outcome(const Vec& x, int segments, int points, const models::StitchAnchors& anchors,
                             double threshold);

}  // namespace crepe::harness
