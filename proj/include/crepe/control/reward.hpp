#pragma once

#include "crepe/core/time_grid.hpp"
#include "crepe/core/types.hpp"
#include "crepe/models/score_model.hpp"
#include "crepe/models/stitch.hpp"

#include <atomic>
#include <memory>
#include <string>
#include <vector>

namespace crepe::control {

class TerminalReward {
public:
    virtual ~TerminalReward() = default;
    virtual double value(const Vec& x0) const = 0;
    virtual bool has_gradient() const { return false; }
    virtual Vec gradient(const Vec& x0) const;
    virtual std::string name() const = 0;
};

// r(x) = a . x + b
class LinearReward : public TerminalReward {
public:
    LinearReward(Vec a, double b = 0.0) : a_(std::move(a)), b_(b) {}
    double value(const Vec& x) const override { return a_.dot(x) + b_; }
    bool has_gradient() const override { return true; }
    Vec gradient(const Vec&) const override { return a_; }
    std::string name() const override { return "linear"; }

private:
    Vec a_;
    double b_;
};

// r(x) = -|x - c|^2 / (2 s^2) scaled by `strength`
class GaussianWellReward : public TerminalReward {
public:
    GaussianWellReward(Vec center, double scale, double strength = 1.0)
        : c_(std::move(center)), s2_(scale * scale), k_(strength) {}
    double value(const Vec& x) const override { return -k_ * (x - c_).squaredNorm() / (2.0 * s2_); }
    bool has_gradient() const override { return true; }
    Vec gradient(const Vec& x) const override { return -k_ * (x - c_) / s2_; }
    std::string name() const override { return "gaussian-well"; }

private:
    Vec c_;
    double s2_, k_;
};

// Trajectory-stitching penalty over J segments of L 2-D points.
class StitchReward : public TerminalReward {
public:
    StitchReward(int segments, int points, models::StitchAnchors anchors, models::StitchWeights weights);
    double value(const Vec& x) const override;
    bool has_gradient() const override { return true; }
    Vec gradient(const Vec& x) const override;
    std::string name() const override { return "stitch"; }

    const models::StitchAnchors& anchors() const { return anchors_; }
    const models::StitchWeights& weights() const { return weights_; }
    int segments() const { return segments_; }
    int points() const { return points_; }

private:
    int segments_, points_;
    models::StitchAnchors anchors_;
    models::StitchWeights weights_;
};

std::vector<Eigen::Vector2d> stitch_points(const Vec& x, int segments, int points);
double stitch_reward(const std::vector<std::vector<Eigen::Vector2d>>& trajectories, const models::StitchAnchors& anchors,
                     const models::StitchWeights& weights);
std::vector<double> stitch_attention(const std::vector<Eigen::Vector2d>& pts, const Eigen::Vector2d& anchor,
                                     const models::StitchWeights& weights);

// beta_m = [b1^(1/rho) + ((M - m)/M)(b0^(1/rho) - b1^(1/rho))]^rho with b0 = 1 at level 0, b1 = 0 at level M.
struct RewardSchedule {
    double rho = 5.0;
    double beta0 = 1.0;
    double beta1 = 0.0;

    double beta_of_level(int m, int M) const;
    // Piecewise-linear in diffusion time between level times; 1 below level 0.
    double beta_at_time(double t, const TimeGrid& grid) const;
};

struct RewardSpec {
    std::shared_ptr<const TerminalReward> terminal;
    std::shared_ptr<std::atomic<std::uint64_t>> evaluations = std::make_shared<std::atomic<std::uint64_t>>(0);

    bool has_gradient() const { return terminal && terminal->has_gradient(); }
};

// r_t(x) = beta r_0(E[x_0 | x_t = x]) and its gradient (needs the model Hessian).
double tweedie_reward(const Vec& x, double t, double beta, const models::ScoreModel& model, const RewardSpec& reward);
Vec tweedie_reward_gradient(const Vec& x, double t, double beta, const models::ScoreModel& model,
                            const RewardSpec& reward);

}  // namespace crepe::control
