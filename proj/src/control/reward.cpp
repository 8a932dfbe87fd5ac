#include "crepe/control/reward.hpp"

#include "crepe/core/errors.hpp"
#include "crepe/core/logmath.hpp"

#include <algorithm>
#include <cmath>

namespace crepe::control {

Vec TerminalReward::gradient(const Vec&) const {
    throw ConfigError("unsupported", "reward '" + name() + "' has no gradient");
}

namespace {

using P2 = Eigen::Vector2d;

double dist_cost(const P2& a, const P2& b, const models::StitchWeights& w) {
    const P2 d = a - b;
    return w.lambda_l2 * d.squaredNorm() + w.lambda_l1 * d.cwiseAbs().sum();
}

P2 dist_cost_grad(const P2& a, const P2& b, const models::StitchWeights& w) {
    const P2 d = a - b;
    return 2.0 * w.lambda_l2 * d + w.lambda_l1 * P2(d[0] > 0 ? 1.0 : (d[0] < 0 ? -1.0 : 0.0),
                                                  d[1] > 0 ? 1.0 : (d[1] < 0 ? -1.0 : 0.0));
}

}  // namespace

std::vector<Eigen::Vector2d> stitch_points(const Vec& x, int segments, int points) {
    if (x.size() != 2 * segments * points) throw ConfigError("shape", "stitch state has wrong dimension");
    std::vector<P2> out(segments * points);
    for (int k = 0; k < segments * points; ++k) out[k] = P2(x[2 * k], x[2 * k + 1]);
    return out;
}

std::vector<double> stitch_attention(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector2d& anchor,
                                     const models::StitchWeights& w) {
    std::vector<double> logits(pts.size());
    for (std::size_t k = 0; k < pts.size(); ++k) logits[k] = -w.tau * dist_cost(pts[k], anchor, w);
    return softmax(logits);
}

double stitch_reward(const std::vector<std::vector<Eigen::Vector2d>>& traj, const models::StitchAnchors& anchors,
                     const models::StitchWeights& w) {
    if (traj.empty() || traj.front().empty()) throw ConfigError("shape", "stitch reward needs non-empty trajectories");
    double r = -w.lambda_o * dist_cost(traj.front().front(), anchors.origin, w);
    r -= w.lambda_p * dist_cost(traj.back().back(), anchors.target, w);
    for (std::size_t j = 0; j + 1 < traj.size(); ++j) r -= w.lambda_n * dist_cost(traj[j].back(), traj[j + 1].front(), w);
    if (anchors.intermediate) {
        std::vector<P2> all;
        for (const auto& seg : traj) all.insert(all.end(), seg.begin(), seg.end());
        const auto alpha = stitch_attention(all, *anchors.intermediate, w);
        for (std::size_t k = 0; k < all.size(); ++k) r -= w.lambda_i * alpha[k] * dist_cost(all[k], *anchors.intermediate, w);
    }
    return r;
}

StitchReward::StitchReward(int segments, int points, models::StitchAnchors anchors, models::StitchWeights weights)
    : segments_(segments), points_(points), anchors_(std::move(anchors)), weights_(weights) {
    if (segments < 1 || points < 1) throw ConfigError("invalid-config", "stitch reward needs segments and points");
    weights_.validate();
}

double StitchReward::value(const Vec& x) const {
    const auto pts = stitch_points(x, segments_, points_);
    std::vector<std::vector<P2>> traj(segments_);
    for (int j = 0; j < segments_; ++j) traj[j].assign(pts.begin() + j * points_, pts.begin() + (j + 1) * points_);
    return stitch_reward(traj, anchors_, weights_);
}

Vec StitchReward::gradient(const Vec& x) const {
    const auto pts = stitch_points(x, segments_, points_);
    const auto& w = weights_;
    std::vector<P2> g(pts.size(), P2::Zero());
    const int last = segments_ * points_ - 1;
    g[0] -= w.lambda_o * dist_cost_grad(pts[0], anchors_.origin, w);
    g[last] -= w.lambda_p * dist_cost_grad(pts[last], anchors_.target, w);
    for (int j = 0; j + 1 < segments_; ++j) {
        const int tail = j * points_ + points_ - 1, head = (j + 1) * points_;
        const P2 d = dist_cost_grad(pts[tail], pts[head], w);
        g[tail] -= w.lambda_n * d;
        g[head] += w.lambda_n * d;
    }
    if (anchors_.intermediate) {
        const P2& I = *anchors_.intermediate;
        const auto alpha = stitch_attention(pts, I, w);
        double S = 0.0;
        std::vector<double> c(pts.size());
        for (std::size_t k = 0; k < pts.size(); ++k) {
            c[k] = dist_cost(pts[k], I, w);
            S += alpha[k] * c[k];
        }
        // d(sum_k alpha_k c_k)/dc_j = alpha_j (1 - tau (c_j - S))
        for (std::size_t k = 0; k < pts.size(); ++k)
            g[k] -= w.lambda_i * alpha[k] * (1.0 - w.tau * (c[k] - S)) * dist_cost_grad(pts[k], I, w);
    }
    Vec out(x.size());
    for (std::size_t k = 0; k < pts.size(); ++k) out.segment<2>(2 * k) = g[k];
    return out;
}

double RewardSchedule::beta_of_level(int m, int M) const {
    if (M <= 0) return beta0;
    const double a = std::pow(beta1, 1.0 / rho), b = std::pow(beta0, 1.0 / rho);
    if (m >= M) return beta1;
    if (m <= 0) return beta0;
    return std::pow(a + (static_cast<double>(M - m) / M) * (b - a), rho);
}

double RewardSchedule::beta_at_time(double t, const TimeGrid& grid) const {
    const int M = grid.num_levels();
    if (t <= grid.level_time(0)) return beta0;
    if (t >= grid.level_time(M)) return beta1;
    int m = 1;
    while (grid.level_time(m) < t) ++m;
    const double t0 = grid.level_time(m - 1), t1 = grid.level_time(m);
    const double u = (t - t0) / (t1 - t0);
    return (1.0 - u) * beta_of_level(m - 1, M) + u * beta_of_level(m, M);
}

double tweedie_reward(const Vec& x, double t, double beta, const models::ScoreModel& model, const RewardSpec& reward) {
    if (beta == 0.0) return 0.0;
    reward.evaluations->fetch_add(1, std::memory_order_relaxed);
    return beta * reward.terminal->value(model.denoise(x, t));
}

Vec tweedie_reward_gradient(const Vec& x, double t, double beta, const models::ScoreModel& model,
                            const RewardSpec& reward) {
    if (beta == 0.0) return Vec::Zero(x.size());
    const Vec g0 = reward.terminal->gradient(model.denoise(x, t));
    // Jacobian of the denoiser is I + var(t) H, symmetric.
    return beta * (g0 + model.noise().var(t) * model.hvp(x, t, g0));
}

}  // namespace crepe::control
