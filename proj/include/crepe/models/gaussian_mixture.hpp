#pragma once

#include "crepe/models/score_model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace crepe::models {

struct Component {
    double weight = 1.0;
    Vec mean;
    double var = 1.0;  // isotropic data variance
};

// Mixture with component covariance (var_i + var(t)) I + shared_var U U^T at time t,
// U having orthonormal columns (empty for purely isotropic components).
class GaussianMixtureModel : public ScoreModel {
public:
    GaussianMixtureModel(std::vector<Component> comps, NoiseSchedule noise, Eigen::MatrixXd shared_basis = {},
                         double shared_var = 0.0);

    int dim() const override { return dim_; }
    const NoiseSchedule& noise() const override { return noise_; }
    double log_pt(const Vec& x, double t) const override;
    Vec score(const Vec& x, double t) const override;
    Vec hvp(const Vec& x, double t, const Vec& v) const override;
    Vec data_mean() const override;
    double data_iso_var() const override;
    Vec sample0(RngStream& rng) const override;

    const std::vector<Component>& components() const { return comps_; }

private:
    struct Eval {
        std::vector<double> resp;  // posterior component weights
        std::vector<Vec> scores;   // per-component scores
        double log_p = 0.0;
    };
    Eval evaluate(const Vec& x, double t, bool need_scores) const;
    Vec precision_apply(int i, double t, const Vec& v) const;

    std::vector<Component> comps_;
    NoiseSchedule noise_;
    Eigen::MatrixXd basis_;
    double shared_var_ = 0.0;
    int dim_ = 0;
};

// Equal-weight N(-2, 0.2^2) and N(2, 0.2^2) in one dimension.
GaussianMixtureModel default_bimodal(NoiseSchedule noise = NoiseSchedule::edm());

struct SegmentShapeConfig {
    int points = 8;              // L
    int directions = 8;
    std::vector<double> lengths = {1.0, 2.0};
    double point_var = 0.01;     // sigma_0^2
    double offset_var = 4.0;     // variance of the random translation
};

// 2-D trajectories of L points: straight shapes in a few directions and lengths,
// randomly translated. Layout [x_0, y_0, x_1, y_1, ...].
GaussianMixtureModel segment_model(const SegmentShapeConfig& cfg, NoiseSchedule noise = NoiseSchedule::edm());

// Independent blocks: p_t(x) = prod_j p_t^j(x_j).
class ProductModel : public ScoreModel {
public:
    explicit ProductModel(std::vector<ModelPtr> blocks);

    int dim() const override { return dim_; }
    const NoiseSchedule& noise() const override { return blocks_.front()->noise(); }
    double log_pt(const Vec& x, double t) const override;
    Vec score(const Vec& x, double t) const override;
    Vec hvp(const Vec& x, double t, const Vec& v) const override;
    Vec data_mean() const override;
    double data_iso_var() const override;
    Vec sample0(RngStream& rng) const override;

    int num_blocks() const { return static_cast<int>(blocks_.size()); }
    int block_offset(int j) const { return offsets_[j]; }
    int block_dim(int j) const { return blocks_[j]->dim(); }

private:
    std::vector<ModelPtr> blocks_;
    std::vector<int> offsets_;
    int dim_ = 0;
};

}  // namespace crepe::models
