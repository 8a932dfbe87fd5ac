#include "crepe/harness/metrics.hpp"
#include "crepe/models/gaussian_mixture.hpp"
#include "crepe/pt/ctmc_system.hpp"
#include "crepe/pt/gaussian_system.hpp"
#include "crepe/smc/smc.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace crepe;
using namespace crepe::smc;

namespace {

std::vector<double> logs(std::vector<double> w) {
    for (double& v : w) v = std::log(v);
    return w;
}

pt::GaussianSystemConfig bimodal_config(double beta, int n_steps = 64, int substeps = 4) {
    pt::GaussianSystemConfig c;
    c.task = control::ControlTask{control::Tempering{beta}};
    c.models = {std::make_shared<models::GaussianMixtureModel>(models::default_bimodal())};
    c.grid = make_grid(edm_times(0.01, 10.0, n_steps, 7.0), substeps, 0.01);
    return c;
}

}  // namespace

TEST_CASE("effective sample size") {
    CHECK(ess(std::vector<double>(10, -3.0)).absolute == doctest::Approx(10.0));
    CHECK(ess(std::vector<double>(10, -3.0)).normalized == doctest::Approx(1.0));
    CHECK(ess(std::vector<double>{0.0, kNegInf, kNegInf}).absolute == doctest::Approx(1.0));
    // (sum w)^2 / sum w^2 for w = (1, 2, 3, 4)
    CHECK(ess(logs({1, 2, 3, 4})).absolute == doctest::Approx(100.0 / 30.0));
    CHECK_THROWS_AS(ess(std::vector<double>{kNegInf, kNegInf}), NumericalError);
}

TEST_CASE("systematic resampling") {
    SUBCASE("uniform weights keep every particle") {
        for (double u : {0.01, 0.5, 0.99}) {
            const auto idx = systematic_indices(std::vector<double>(5, 0.2), 5, u);
            for (int i = 0; i < 5; ++i) CHECK(idx[i] == i);
        }
    }
    SUBCASE("point mass") {
        const auto p = plan_systematic(std::vector<double>{kNegInf, 0.0, kNegInf}, 0.3);
        CHECK(p.parents == std::vector<int>{1, 1, 1});
        for (double w : p.weights) CHECK(w == doctest::Approx(1.0 / 3.0));
    }
    SUBCASE("offspring counts are unbiased and within one of n w") {
        const std::vector<double> w{0.05, 0.4, 0.15, 0.3, 0.1};
        std::vector<double> mean(5, 0.0);
        RngStream r(2, {0, 0, Purpose::test});
        const int trials = 100000;
        for (int t = 0; t < trials; ++t) {
            std::vector<int> c(5, 0);
            for (int i : systematic_indices(w, 5, r.uniform())) ++c[i];
            for (int i = 0; i < 5; ++i) {
                CHECK(std::abs(c[i] - 5 * w[i]) < 1.0);
                mean[i] += c[i];
            }
        }
        for (int i = 0; i < 5; ++i) CHECK(mean[i] / trials == doctest::Approx(5 * w[i]).epsilon(0.01));
    }
}

TEST_CASE("partial resampling") {
    SUBCASE("fraction one is systematic") {
        const auto lw = logs({0.1, 0.5, 0.15, 0.25});
        for (double u : {0.05, 0.4, 0.9}) {
            const auto a = plan_partial(lw, 1.0, u), b = plan_systematic(lw, u);
            CHECK(a.parents == b.parents);
            for (int i = 0; i < 4; ++i) CHECK(a.weights[i] == doctest::Approx(b.weights[i]));
        }
    }
    SUBCASE("hand-worked four particle cases") {
        const auto p = plan_partial(logs({0.7, 0.1, 0.1, 0.1}), 0.75, 0.6);
        CHECK(p.parents == std::vector<int>{0, 1, 2, 3});
        CHECK(p.replaced == std::vector<int>{1, 2, 3});
        CHECK(p.weights[0] == doctest::Approx(0.7));
        for (int i = 1; i < 4; ++i) CHECK(p.weights[i] == doctest::Approx(0.1));
        // stratum {2, 3} with mass 0.3: positions (u + i) / 2 against cumulative (2/3, 1)
        const auto q = plan_partial(logs({0.4, 0.3, 0.2, 0.1}), 0.5, 0.1);
        CHECK(q.parents == std::vector<int>{0, 1, 2, 2});
        CHECK(q.weights[2] == doctest::Approx(0.15));
        CHECK(q.weights[3] == doctest::Approx(0.15));
        CHECK(q.weights[0] == doctest::Approx(0.4));
        const auto s = plan_partial(logs({0.4, 0.3, 0.2, 0.1}), 0.5, 0.5);
        CHECK(s.parents == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("weighted expectations are preserved on average") {
        const std::vector<double> w{0.02, 0.3, 0.08, 0.25, 0.05, 0.3};
        const std::vector<double> f{1.0, -2.0, 3.5, 0.5, -1.0, 2.0};
        double target = 0.0;
        for (int i = 0; i < 6; ++i) target += w[i] * f[i];
        RngStream r(5, {0, 0, Purpose::test});
        double acc = 0.0;
        const int trials = 100000;
        for (int t = 0; t < trials; ++t) {
            const auto p = plan_partial(logs(w), 0.5, r.uniform());
            double total = 0.0;
            for (int i = 0; i < 6; ++i) {
                acc += p.weights[i] * f[p.parents[i]];
                total += p.weights[i];
            }
            CHECK(total == doctest::Approx(1.0));
        }
        CHECK(acc / trials == doctest::Approx(target).epsilon(0.005));
    }
}

TEST_CASE("beta = 1 increments vanish") {
    pt::GaussianSystem sys(bimodal_config(1.0));
    SmcConfig cfg;
    cfg.particles = 64;
    cfg.resampling = Resampling::none;
    cfg.seed = 3;
    const auto res = smc_run(sys, cfg);
    for (double inc : res.terminal_increments) CHECK(std::abs(inc) < 1e-9);
    CHECK(res.resample_levels.empty());
    CHECK(res.nfe.path == static_cast<std::uint64_t>(64 * sys.num_levels() * 4));
}

TEST_CASE("resampling triggers on the ESS threshold") {
    pt::GaussianSystem sys(bimodal_config(2.0));
    SmcConfig cfg;
    cfg.particles = 50;
    cfg.seed = 1;
    cfg.ess_threshold = 1.0;
    CHECK(static_cast<int>(smc_run(sys, cfg).resample_levels.size()) == sys.num_levels());
    cfg.ess_threshold = 1e-12;
    CHECK(smc_run(sys, cfg).resample_levels.empty());
    cfg.ess_threshold = 0.0;
    CHECK_THROWS_AS(smc_run(sys, cfg), ConfigError);
}

TEST_CASE("single particle") {
    pt::GaussianSystem sys(bimodal_config(2.0));
    SmcConfig cfg;
    cfg.particles = 1;
    const auto res = smc_run(sys, cfg);
    CHECK(res.samples.size() == 1);
    CHECK(res.system.ess_history.back() == doctest::Approx(1.0));
}

TEST_CASE("bimodal target") {
    const double beta = 1.0;
    pt::GaussianSystem sys(bimodal_config(beta, 128, 4));
    SmcConfig cfg;
    cfg.particles = 1000;
    cfg.resampling = Resampling::partial;
    cfg.seed = 11;
    const auto res = smc_run(sys, cfg);
    std::vector<double> xs, ws;
    const double z = logsumexp(res.system.log_weights);
    for (std::size_t i = 0; i < res.samples.size(); ++i) {
        xs.push_back(res.samples[i][0]);
        ws.push_back(std::exp(res.system.log_weights[i] - z));
    }
    const auto model = models::default_bimodal();
    const double t = sys.grid().t_min();
    const auto density = [&](double x) { return std::exp(beta * model.log_pt(Vec::Constant(1, x), t)); };
    const double tvd = harness::tvd_histogram(xs, density, 64, -4.0, 4.0, ws);
    CHECK(tvd < 0.08);
}

TEST_CASE("a constant reward leaves normalized weights unchanged") {
    auto c = bimodal_config(1.0, 32, 4);
    pt::GaussianSystem plain(c);
    control::RewardTilt rt;
    rt.reward.terminal = std::make_shared<control::LinearReward>(Vec::Zero(1), 3.0);
    c.task = control::ControlTask{rt};
    pt::GaussianSystem tilted(c);
    SmcConfig cfg;
    cfg.particles = 32;
    cfg.resampling = Resampling::none;
    const auto a = smc_run(plain, cfg), b = smc_run(tilted, cfg);
    const double za = logsumexp(a.system.log_weights), zb = logsumexp(b.system.log_weights);
    for (int i = 0; i < 32; ++i) {
        CHECK(a.samples[i][0] == b.samples[i][0]);
        CHECK(a.system.log_weights[i] - za == doctest::Approx(b.system.log_weights[i] - zb).epsilon(1e-10));
    }
}

TEST_CASE("one masked step reproduces the enumerated potentials") {
    // V = 3 plus mask, D = 1, CFG w = 1.2 with the conditional proposal, one step from t = 1 to t0
    const std::vector<double> pa{0.5, 0.3, 0.2}, pb{0.1, 0.3, 0.6};
    pt::CtmcSystemConfig c;
    c.task = control::ControlTask{control::CfgDebias{1.2, 1.0}};
    c.models = {std::make_shared<models::ExactDiscreteModel>(4, 1, pa), std::make_shared<models::ExactDiscreteModel>(4, 1, pb)};
    c.grid = make_grid(uniform_times(0.3, 1.0, 1), 1, 0.3);
    c.kernel.strict = true;
    pt::CtmcSystem sys(c);
    REQUIRE(sys.num_levels() == 1);
    SmcConfig cfg;
    cfg.particles = 40;
    cfg.resampling = Resampling::none;
    const auto res = smc_run(sys, cfg);
    // pi_t0(v) F(mask | v) / (pi_1(mask) B(v | mask)) with F = 1 and B(v | mask) = (1 - t0) pb(v);
    // a token still masked at t0 has pi_t0 = t0 = B(mask | mask), so its potential is 1
    auto potential = [&](int v) { return v == 3 ? 0.0 : -0.2 * std::log(pa[v]) + 1.2 * std::log(pb[v]) - std::log(pb[v]); };
    const auto& ps = res.system;
    std::vector<int> seen(4, 0);
    for (int i = 0; i < cfg.particles; ++i) {
        const int v = ps.particles[i][0];
        ++seen[v];
        CHECK(ps.log_weights[i] - ps.log_weights[0] ==
              doctest::Approx(potential(v) - potential(ps.particles[0][0])).epsilon(1e-12));
    }
    CHECK(seen[3] > 0);
    CHECK(seen[0] + seen[1] + seen[2] > 0);
}
