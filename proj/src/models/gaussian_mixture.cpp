#include "crepe/models/gaussian_mixture.hpp"

#include "crepe/core/errors.hpp"
#include "crepe/core/logmath.hpp"

#include <cmath>
#include <numbers>

namespace crepe::models {

namespace {
constexpr double kLog2Pi = 1.8378770664093454836;
}

GaussianMixtureModel::GaussianMixtureModel(std::vector<Component> comps, NoiseSchedule noise,
                                           Eigen::MatrixXd shared_basis, double shared_var)
    : comps_(std::move(comps)), noise_(noise), basis_(std::move(shared_basis)), shared_var_(shared_var) {
    if (comps_.empty()) throw ConfigError("invalid-model", "mixture needs at least one component");
    dim_ = static_cast<int>(comps_.front().mean.size());
    double total = 0.0;
    for (const auto& c : comps_) {
        if (c.mean.size() != dim_) throw ConfigError("invalid-model", "component dimensions differ");
        if (!(c.weight > 0.0) || !(c.var > 0.0)) throw ConfigError("invalid-model", "weights and variances must be positive");
        total += c.weight;
    }
    if (std::abs(total - 1.0) > 1e-9) throw ConfigError("invalid-model", "mixture weights must sum to 1");
    if (basis_.size() > 0) {
        if (basis_.rows() != dim_) throw ConfigError("invalid-model", "shared basis row count != dim");
        const Eigen::MatrixXd g = basis_.transpose() * basis_;
        if (!g.isApprox(Eigen::MatrixXd::Identity(g.rows(), g.cols()), 1e-10))
            throw ConfigError("invalid-model", "shared basis must have orthonormal columns");
    }
    if (shared_var_ < 0.0) throw ConfigError("invalid-model", "shared variance must be non-negative");
}

Vec GaussianMixtureModel::precision_apply(int i, double t, const Vec& v) const {
    const double a = comps_[i].var + noise_.var(t);
    if (basis_.size() == 0 || shared_var_ == 0.0) return v / a;
    const double shrink = shared_var_ / (a + shared_var_);
    return (v - shrink * (basis_ * (basis_.transpose() * v))) / a;
}

GaussianMixtureModel::Eval GaussianMixtureModel::evaluate(const Vec& x, double t, bool need_scores) const {
    const int n = static_cast<int>(comps_.size());
    const int r = basis_.size() == 0 ? 0 : static_cast<int>(basis_.cols());
    Eval e;
    e.resp.resize(n);
    if (need_scores) e.scores.resize(n);
    for (int i = 0; i < n; ++i) {
        const double a = comps_[i].var + noise_.var(t);
        const Vec d = x - comps_[i].mean;
        const Vec pd = precision_apply(i, t, d);
        const double logdet = (dim_ - r) * std::log(a) + r * std::log(a + shared_var_);
        e.resp[i] = std::log(comps_[i].weight) - 0.5 * (d.dot(pd) + dim_ * kLog2Pi + logdet);
        if (need_scores) e.scores[i] = -pd;
    }
    e.log_p = logsumexp(e.resp);
    for (double& w : e.resp) w = std::exp(w - e.log_p);
    return e;
}

double GaussianMixtureModel::log_pt(const Vec& x, double t) const { return evaluate(x, t, false).log_p; }

Vec GaussianMixtureModel::score(const Vec& x, double t) const {
    const Eval e = evaluate(x, t, true);
    Vec s = Vec::Zero(dim_);
    for (std::size_t i = 0; i < comps_.size(); ++i) s += e.resp[i] * e.scores[i];
    return s;
}

Vec GaussianMixtureModel::hvp(const Vec& x, double t, const Vec& v) const {
    const Eval e = evaluate(x, t, true);
    Vec s = Vec::Zero(dim_);
    Vec out = Vec::Zero(dim_);
    for (std::size_t i = 0; i < comps_.size(); ++i) {
        s += e.resp[i] * e.scores[i];
        out += e.resp[i] * (e.scores[i] * e.scores[i].dot(v) - precision_apply(static_cast<int>(i), t, v));
    }
    return out - s * s.dot(v);
}

Vec GaussianMixtureModel::data_mean() const {
    Vec m = Vec::Zero(dim_);
    for (const auto& c : comps_) m += c.weight * c.mean;
    return m;
}

double GaussianMixtureModel::data_iso_var() const {
    const Vec m = data_mean();
    double second = 0.0;
    for (const auto& c : comps_) second += c.weight * (c.var * dim_ + c.mean.squaredNorm());
    const int r = basis_.size() == 0 ? 0 : static_cast<int>(basis_.cols());
    return (second - m.squaredNorm() + shared_var_ * r) / dim_;
}

Vec GaussianMixtureModel::sample0(RngStream& rng) const {
    std::vector<double> w;
    for (const auto& c : comps_) w.push_back(c.weight);
    const auto& c = comps_[rng.categorical(w)];
    Vec eps(dim_);
    rng.fill_normal(eps);
    Vec x = c.mean + std::sqrt(c.var) * eps;
    if (basis_.size() > 0 && shared_var_ > 0.0) {
        Vec z(basis_.cols());
        rng.fill_normal(z);
        x += std::sqrt(shared_var_) * (basis_ * z);
    }
    return x;
}

GaussianMixtureModel default_bimodal(NoiseSchedule noise) {
    std::vector<Component> comps = {{0.5, Vec::Constant(1, -2.0), 0.04}, {0.5, Vec::Constant(1, 2.0), 0.04}};
    GaussianMixtureModel m(std::move(comps), noise);
    m.label = "bimodal";
    return m;
}

GaussianMixtureModel segment_model(const SegmentShapeConfig& cfg, NoiseSchedule noise) {
    if (cfg.points < 2 || cfg.directions < 1 || cfg.lengths.empty())
        throw ConfigError("invalid-model", "segment model needs >= 2 points, >= 1 direction and a length");
    const int L = cfg.points;
    const int d = 2 * L;
    std::vector<Component> comps;
    const double w = 1.0 / (cfg.directions * static_cast<double>(cfg.lengths.size()));
    for (int k = 0; k < cfg.directions; ++k) {
        const double th = 2.0 * std::numbers::pi * k / cfg.directions;
        for (double len : cfg.lengths) {
            Vec mean(d);
            for (int l = 0; l < L; ++l) {
                const double s = len * (static_cast<double>(l) / (L - 1) - 0.5);
                mean[2 * l] = s * std::cos(th);
                mean[2 * l + 1] = s * std::sin(th);
            }
            comps.push_back({w, mean, cfg.point_var});
        }
    }
    // translation of all points: covariance offset_var (1 1^T kron I_2) = L offset_var U U^T
    Eigen::MatrixXd U = Eigen::MatrixXd::Zero(d, 2);
    for (int l = 0; l < L; ++l) {
        U(2 * l, 0) = 1.0 / std::sqrt(static_cast<double>(L));
        U(2 * l + 1, 1) = 1.0 / std::sqrt(static_cast<double>(L));
    }
    GaussianMixtureModel m(std::move(comps), noise, U, cfg.offset_var * L);
    m.label = "segment";
    return m;
}

ProductModel::ProductModel(std::vector<ModelPtr> blocks) : blocks_(std::move(blocks)) {
    if (blocks_.empty()) throw ConfigError("invalid-model", "product model needs blocks");
    for (const auto& b : blocks_) {
        if (!(b->noise() == blocks_.front()->noise())) throw ConfigError("invalid-model", "product blocks need one schedule");
        offsets_.push_back(dim_);
        dim_ += b->dim();
    }
    label = "product";
}

double ProductModel::log_pt(const Vec& x, double t) const {
    double acc = 0.0;
    for (std::size_t j = 0; j < blocks_.size(); ++j) acc += blocks_[j]->log_pt(x.segment(offsets_[j], blocks_[j]->dim()), t);
    return acc;
}

Vec ProductModel::score(const Vec& x, double t) const {
    Vec out(dim_);
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
        const int n = blocks_[j]->dim();
        out.segment(offsets_[j], n) = blocks_[j]->score(x.segment(offsets_[j], n), t);
    }
    return out;
}

Vec ProductModel::hvp(const Vec& x, double t, const Vec& v) const {
    Vec out(dim_);
    for (std::size_t j = 0; j < blocks_.size(); ++j) {
        const int n = blocks_[j]->dim();
        out.segment(offsets_[j], n) = blocks_[j]->hvp(x.segment(offsets_[j], n), t, v.segment(offsets_[j], n));
    }
    return out;
}

Vec ProductModel::data_mean() const {
    Vec out(dim_);
    for (std::size_t j = 0; j < blocks_.size(); ++j) out.segment(offsets_[j], blocks_[j]->dim()) = blocks_[j]->data_mean();
    return out;
}

double ProductModel::data_iso_var() const {
    double acc = 0.0;
    for (const auto& b : blocks_) acc += b->data_iso_var() * b->dim();
    return acc / dim_;
}

Vec ProductModel::sample0(RngStream& rng) const {
    Vec out(dim_);
    for (std::size_t j = 0; j < blocks_.size(); ++j) out.segment(offsets_[j], blocks_[j]->dim()) = blocks_[j]->sample0(rng);
    return out;
}

}  // namespace crepe::models
