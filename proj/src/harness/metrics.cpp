#include "crepe/harness/metrics.hpp"

#include "crepe/control/reward.hpp"
#include "crepe/core/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace crepe::harness {

double tvd_probs(std::span<const double> p, std::span<const double> q) {
    if (p.size() != q.size()) throw ConfigError("invalid-argument", "tvd needs equal-length distributions");
    const double sp = std::accumulate(p.begin(), p.end(), 0.0);
    const double sq = std::accumulate(q.begin(), q.end(), 0.0);
    if (!(sp > 0.0) || !(sq > 0.0)) throw ConfigError("invalid-argument", "tvd of an empty distribution");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) acc += std::abs(p[i] / sp - q[i] / sq);
    return std::clamp(0.5 * acc, 0.0, 1.0);
}

std::vector<double> histogram(std::span<const double> samples, int bins, double lo, double hi,
                              std::span<const double> weights) {
    if (bins < 1 || !(hi > lo)) throw ConfigError("invalid-argument", "histogram needs bins >= 1 and hi > lo");
    if (!weights.empty() && weights.size() != samples.size())
        throw ConfigError("invalid-argument", "weights and samples differ in length");
    std::vector<double> h(bins + 1, 0.0);
    const double width = (hi - lo) / bins;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        const double x = samples[i];
        int b = bins;
        if (x >= lo && x <= hi) b = std::min(bins - 1, static_cast<int>((x - lo) / width));
        h[b] += w;
    }
    return h;
}

std::vector<double> binned_density(const std::function<double(double)>& density, int bins, double lo, double hi) {
    constexpr int kPanels = 32;
    std::vector<double> mass(bins + 1, 0.0);
    const double width = (hi - lo) / bins;
    const double h = width / kPanels;
    for (int b = 0; b < bins; ++b) {
        const double a = lo + b * width;
        double s = density(a) + density(a + width);
        for (int i = 1; i < kPanels; ++i) s += (i % 2 ? 4.0 : 2.0) * density(a + i * h);
        mass[b] = s * h / 3.0;
    }
    return mass;
}

double tvd_histogram(std::span<const double> samples, const std::function<double(double)>& density, int bins, double lo,
                     double hi, std::span<const double> weights) {
    if (samples.empty()) throw ConfigError("invalid-argument", "tvd of an empty sample");
    return tvd_probs(histogram(samples, bins, lo, hi, weights), binned_density(density, bins, lo, hi));
}

double w2_1d(std::span<const double> a, std::span<const double> b) {
    if (a.empty() || b.empty()) throw ConfigError("invalid-argument", "w2 of an empty sample");
    std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
    std::sort(x.begin(), x.end());
    std::sort(y.begin(), y.end());
    const double na = static_cast<double>(x.size()), nb = static_cast<double>(y.size());
    // Walk the merged breakpoints of both empirical quantile functions.
    double acc = 0.0, u = 0.0;
    std::size_t i = 0, j = 0;
    while (i < x.size() && j < y.size()) {
        const double next = std::min((i + 1) / na, (j + 1) / nb);
        const double d = x[i] - y[j];
        acc += (next - u) * d * d;
        u = next;
        if ((i + 1) / na <= next) ++i;
        if ((j + 1) / nb <= next) ++j;
    }
    return std::sqrt(std::max(0.0, acc));
}

std::vector<double> density_quantiles(const std::function<double(double)>& density, double lo, double hi, int n) {
    constexpr int kGrid = 20000;
    const double h = (hi - lo) / kGrid;
    std::vector<double> cdf(kGrid + 1, 0.0);
    double prev = density(lo);
    for (int i = 1; i <= kGrid; ++i) {
        const double cur = density(lo + i * h);
        cdf[i] = cdf[i - 1] + 0.5 * (prev + cur) * h;
        prev = cur;
    }
    const double total = cdf.back();
    if (!(total > 0.0)) throw NumericalError("degenerate-density", "density integrates to zero on the window");
    std::vector<double> q(n);
    for (int k = 0; k < n; ++k) {
        const double target = (k + 0.5) / n * total;
        const auto it = std::lower_bound(cdf.begin(), cdf.end(), target);
        const std::size_t i = std::clamp<std::size_t>(it - cdf.begin(), 1, kGrid);
        const double span = cdf[i] - cdf[i - 1];
        const double frac = span > 0.0 ? (target - cdf[i - 1]) / span : 0.5;
        q[k] = lo + (static_cast<double>(i - 1) + frac) * h;
    }
    return q;
}

ModeOccupancy mode_occupancy(std::span<const double> samples, double split, std::span<const double> weights) {
    double below = 0.0, total = 0.0;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const double w = weights.empty() ? 1.0 : weights[i];
        total += w;
        if (samples[i] < split) below += w;
    }
    if (!(total > 0.0)) return {};
    return {below / total, 1.0 - below / total};
}

StitchOutcome stitch_outcome(const Vec& x, int segments, int points, const models::StitchAnchors& anchors,
                             double threshold) {
    const auto pts = control::stitch_points(x, segments, points);
    StitchOutcome out;
    double gap = (pts.front() - anchors.origin).norm();
    gap = std::max(gap, (pts.back() - anchors.target).norm());
    for (int j = 0; j + 1 < segments; ++j)
        gap = std::max(gap, (pts[(j + 1) * points - 1] - pts[(j + 1) * points]).norm());
    out.max_gap = gap;
    out.success = gap < threshold;
    if (anchors.intermediate) {
        double best = INFINITY;
        for (const auto& p : pts) best = std::min(best, (p - *anchors.intermediate).norm());
        out.pass_through = best < threshold;
    }
    return out;
}

}  // namespace crepe::harness
