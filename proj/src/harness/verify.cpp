#include "crepe/harness/verify.hpp"

#include "crepe/core/errors.hpp"
#include "crepe/core/rng.hpp"
#include "crepe/gaussian/sde.hpp"
#include "crepe/harness/config.hpp"
#include "crepe/models/gaussian_mixture.hpp"
#include "crepe/pt/ctmc_system.hpp"
#include "crepe/pt/engine.hpp"
#include "crepe/pt/gaussian_system.hpp"
#include "crepe/smc/smc.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace crepe::harness {

namespace {

using nlohmann::json;

// Tempering beta = 1 on [0.1, 0.2] with dt = 1e-3, M = 20, K = 5: every proposal is the exact reversal.
json beta1_config(std::uint64_t iterations) {
    return json{{"seed", 0},
                {"models", json::array({{{"kind", "bimodal"}}})},
                {"task", {{"kind", "tempering"}, {"beta", 1.0}}},
                {"grid",
                 {{"kind", "uniform"}, {"t_min", 0.1}, {"t_max", 0.2}, {"n_steps", 100}, {"substeps", 5},
                  {"truncation_time", 0.1}}},
                {"engine", {{"iterations", iterations}, {"burn_in", 0}}}};
}

json cfg_ctmc_config() {
    return json{{"seed", 0},
                {"models", json::array({{{"kind", "discrete"}, {"vocab", 4}, {"length", 1}, {"joint", {0.5, 0.3, 0.2}}},
                                        {{"kind", "discrete"}, {"vocab", 4}, {"length", 1}, {"joint", {0.1, 0.3, 0.6}}}})},
                {"task", {{"kind", "cfg"}, {"w", 1.2}}},
                {"grid",
                 {{"kind", "uniform"}, {"t_min", 0.05}, {"t_max", 1.0}, {"n_steps", 8}, {"substeps", 1},
                  {"truncation_time", 0.05}}},
                {"kernel", {{"strict", true}}}};
}

VerifyReport suite_rne_identity(std::uint64_t seed) {
    VerifyReport r{"rne-identity", true, "", json::object()};
    const auto rows = rne_identity_table({4e-3, 2e-3, 1e-3}, 10000, seed);
    std::string t = fmt::format("{:>10} {:>16} {:>16} {:>8}\n", "dt", "mean|err|", "mean err", "ratio");
    json jr = json::array();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double ratio = i == 0 ? NAN : rows[i - 1].mean_abs_error / rows[i].mean_abs_error;
        if (i > 0 && !(ratio >= 1.5)) r.passed = false;
        t += fmt::format("{:>10.1e} {:>16.6e} {:>16.6e} {:>8.3f}\n", rows[i].dt, rows[i].mean_abs_error,
                         rows[i].mean_error, ratio);
        jr.push_back({{"dt", rows[i].dt}, {"mean_abs_error", rows[i].mean_abs_error}, {"mean_error", rows[i].mean_error}});
    }
    r.table = t;
    r.details = {{"rows", jr}, {"required_ratio", 1.5}};
    return r;
}

VerifyReport suite_ctmc_detailed_balance() {
    VerifyReport r{"ctmc-detailed-balance", false, "", json::object()};
    const json resolved = resolve_config(cfg_ctmc_config());
    pt::CtmcSystem sys(build_ctmc_config(resolved));
    const auto& model = *sys.config().models.front();
    const std::size_t S = model.num_states();
    const int L = model.length(), V = model.vocab();
    double worst = 0.0;
    std::string t = fmt::format("{:>6} {:>14}\n", "pair", "max violation");
    for (int m = 1; m <= sys.num_levels(); ++m) {
        const auto seg = sys.grid().segment(m);
        const double lo = seg.front(), hi = seg.back();
        std::vector<double> pl(S), ph(S);
        for (std::size_t i = 0; i < S; ++i) {
            pl[i] = sys.log_pi(model.state(i), lo);
            ph[i] = sys.log_pi(model.state(i), hi);
        }
        const double zl = logsumexp(pl), zh = logsumexp(ph);
        // one-step kernels F(y|a) and B(z|b)
        std::vector<std::vector<double>> F(S, std::vector<double>(S, 1.0)), B(S, std::vector<double>(S, 1.0));
        std::vector<double> row(V);
        for (std::size_t a = 0; a < S; ++a) {
            const Tokens xa = model.state(a);
            const auto bundle = sys.bundle(xa);
            for (std::size_t y = 0; y < S; ++y) {
                const Tokens xy = model.state(y);
                for (int i = 0; i < L; ++i) {
                    sys.forward_row(xa, i, lo, hi - lo, row);
                    F[a][y] *= row[xy[i]];
                    sys.backward_row(xa, bundle, i, sys.proposal_coeffs(), hi, hi - lo, row);
                    B[a][y] *= row[xy[i]];
                }
            }
        }
        auto score = [&](std::size_t low, std::size_t high) {
            pt::CtmcPath p;
            p.states = {model.state(low), model.state(high)};
            return sys.score_path(p, m);
        };
        std::vector<std::vector<double>> sc(S, std::vector<double>(S));
        for (std::size_t a = 0; a < S; ++a)
            for (std::size_t b = 0; b < S; ++b) sc[a][b] = score(a, b);
        double level_worst = 0.0;
        for (std::size_t a = 0; a < S; ++a)
            for (std::size_t b = 0; b < S; ++b)
                for (std::size_t z = 0; z < S; ++z)
                    for (std::size_t y = 0; y < S; ++y) {
                        // (a, b) -> (z, y): forward a -> y, backward b -> z
                        auto alpha = [&](double sf, double sb) {
                            if (!std::isfinite(sf) || !std::isfinite(sb)) return 0.0;
                            return std::exp(std::min(0.0, sf - sb));
                        };
                        const double there = std::exp(pl[a] - zl + ph[b] - zh) * F[a][y] * B[b][z] * alpha(sc[a][y], sc[z][b]);
                        const double back = std::exp(pl[z] - zl + ph[y] - zh) * F[z][b] * B[y][a] * alpha(sc[z][b], sc[a][y]);
                        level_worst = std::max(level_worst, std::abs(there - back));
                    }
        worst = std::max(worst, level_worst);
        t += fmt::format("{:>6} {:>14.3e}\n", fmt::format("{}-{}", m - 1, m), level_worst);
    }
    r.passed = worst <= 1e-10;
    r.table = t;
    r.details = {{"max_violation", worst}, {"threshold", 1e-10}};
    return r;
}

VerifyReport suite_beta1_acceptance() {
    VerifyReport r{"beta1-acceptance", false, "", json::object()};
    const json resolved = resolve_config(beta1_config(2000));
    pt::GaussianSystem sys(build_gaussian_config(resolved));
    pt::PtEngine<pt::GaussianSystem> engine(sys, build_engine_config(resolved));
    auto ens = engine.init_ensemble();
    engine.run(ens, 2000, nullptr);
    const auto& d = engine.diagnostics();
    std::string t = fmt::format("{:>6} {:>12}\n", "pair", "accept prob");
    for (int m = 1; m <= sys.num_levels(); ++m) t += fmt::format("{:>6} {:>12.4f}\n", m, d.mean_accept_prob(m));
    const double mean = d.mean_accept_prob();
    t += fmt::format("mean {:.4f} (threshold 0.9)\n", mean);
    r.passed = mean >= 0.9;
    r.table = t;
    r.details = {{"mean_accept_prob", mean}};
    return r;
}

VerifyReport suite_nfe_parity() {
    VerifyReport r{"nfe-parity", false, "", json::object()};
    const std::uint64_t N = 200;
    json cfg = beta1_config(N);
    cfg["smc"] = {{"particles", N}};
    const json resolved = resolve_config(cfg);
    pt::GaussianSystem sys(build_gaussian_config(resolved));
    pt::PtEngine<pt::GaussianSystem> engine(sys, build_engine_config(resolved));
    auto ens = engine.init_ensemble();
    engine.run(ens, N, nullptr);
    pt::GaussianSystem sys2(build_gaussian_config(resolved));
    const auto res = smc::smc_run(sys2, build_smc_config(resolved));
    const auto M = static_cast<std::uint64_t>(sys.num_levels());
    const auto K = static_cast<std::uint64_t>(sys.grid().substeps);
    const std::uint64_t pt_nfe = engine.diagnostics().nfe.path, smc_nfe = res.nfe.path;
    r.passed = pt_nfe == smc_nfe && pt_nfe == M * K * N;
    r.table = fmt::format("PT path NFE {}\nSMC path NFE {}\nM*K*N {}\n", pt_nfe, smc_nfe, M * K * N);
    r.details = {{"pt", pt_nfe}, {"smc", smc_nfe}, {"mkn", M * K * N}};
    return r;
}

VerifyReport suite_score_fd(std::uint64_t seed) {
    VerifyReport r{"score-fd", false, "", json::object()};
    const auto model = models::default_bimodal();
    RngStream rng(seed, {0, 0, Purpose::test});
    const double h = 1e-6;
    double worst = 0.0;
    for (int i = 0; i < 100; ++i) {
        Vec x = Vec::Constant(1, -4.0 + 8.0 * rng.uniform());
        const double t = std::exp(std::log(1e-3) + (std::log(10.0) - std::log(1e-3)) * rng.uniform());
        Vec xp = x, xm = x;
        xp[0] += h;
        xm[0] -= h;
        const double fd = (model.log_pt(xp, t) - model.log_pt(xm, t)) / (2 * h);
        worst = std::max(worst, std::abs(fd - model.score(x, t)[0]));
    }
    r.passed = worst < 1e-5;
    r.table = fmt::format("max |score - central difference| = {:.3e} over 100 points (threshold 1e-5)\n", worst);
    r.details = {{"max_abs_error", worst}};
    return r;
}

VerifyReport suite_smc_weights() {
    VerifyReport r{"smc-weights", false, "", json::object()};
    json cfg = beta1_config(0);
    cfg["smc"] = {{"particles", 2000}, {"resampling", "none"}};
    const json resolved = resolve_config(cfg);
    pt::GaussianSystem sys(build_gaussian_config(resolved));
    const auto res = smc::smc_run(sys, build_smc_config(resolved));
    double mean = 0.0, sq = 0.0;
    for (double v : res.terminal_increments) mean += v;
    mean /= static_cast<double>(res.terminal_increments.size());
    for (double v : res.terminal_increments) sq += (v - mean) * (v - mean);
    const double sd = std::sqrt(sq / static_cast<double>(res.terminal_increments.size()));
    const double e = smc::ess(res.terminal_increments).normalized;
    r.passed = sd < 0.05 && e > 0.95;
    r.table = fmt::format("increment std {:.4f} (< 0.05), normalized ESS {:.4f} (> 0.95)\n", sd, e);
    r.details = {{"increment_std", sd}, {"ess", e}};
    return r;
}

}  // namespace

std::vector<RneConvergenceRow> rne_identity_table(const std::vector<double>& dts, int paths, std::uint64_t seed) {
    const auto model = models::default_bimodal();
    const auto noise = model.noise();
    const double t0 = 0.1, t1 = 1.0;
    std::vector<RneConvergenceRow> rows;
    for (std::size_t d = 0; d < dts.size(); ++d) {
        const int n = static_cast<int>(std::lround((t1 - t0) / dts[d]));
        std::vector<double> times(n + 1);
        for (int k = 0; k <= n; ++k) times[k] = t0 + (t1 - t0) * k / n;
        double abs_sum = 0.0, sum = 0.0;
        std::vector<Vec> states(n + 1), fwd(n + 1), bwd(n + 1);
        for (int p = 0; p < paths; ++p) {
            RngStream rng(seed, {static_cast<std::uint32_t>(d), static_cast<std::uint64_t>(p), Purpose::test});
            Vec x = model.sample0(rng);
            x[0] += std::sqrt(noise.var(t0)) * rng.normal();
            states[0] = x;
            for (int k = 1; k <= n; ++k) {
                const double dt = times[k] - times[k - 1];
                states[k] = states[k - 1] + std::sqrt(noise.sigma2(times[k - 1]) * dt) * Vec::Constant(1, rng.normal());
            }
            for (int k = 0; k <= n; ++k) {
                fwd[k] = Vec::Zero(1);
                bwd[k] = -noise.sigma2(times[k]) * model.score(states[k], times[k]);
            }
            const double lr = gaussian::log_rne_from_drifts(times, states, fwd, bwd, noise);
            const double err = lr + model.log_pt(states[n], t1) - model.log_pt(states[0], t0);
            abs_sum += std::abs(err);
            sum += err;
        }
        rows.push_back({dts[d], abs_sum / paths, sum / paths});
    }
    return rows;
}

const std::vector<std::string>& verify_suites() {
    static const std::vector<std::string> names{"rne-identity", "ctmc-detailed-balance", "beta1-acceptance",
                                                "nfe-parity",   "score-fd",              "smc-weights"};
    return names;
}

VerifyReport verify(const std::string& suite, std::uint64_t seed) {
    if (suite == "rne-identity") return suite_rne_identity(seed);
    if (suite == "ctmc-detailed-balance") return suite_ctmc_detailed_balance();
    if (suite == "beta1-acceptance") return suite_beta1_acceptance();
    if (suite == "nfe-parity") return suite_nfe_parity();
    if (suite == "score-fd") return suite_score_fd(seed);
    if (suite == "smc-weights") return suite_smc_weights();
    std::string list;
    for (const auto& s : verify_suites()) list += (list.empty() ? "" : ", ") + s;
    throw ConfigError("unknown-suite", "unknown suite '" + suite + "'; available: " + list);
}

}  // namespace crepe::harness
