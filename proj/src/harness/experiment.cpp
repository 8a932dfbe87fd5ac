#include "crepe/harness/experiment.hpp"

#include "crepe/core/errors.hpp"
#include "crepe/core/format.hpp"
#include "crepe/harness/metrics.hpp"
#include "crepe/pt/checkpoint.hpp"
#include "crepe/pt/engine.hpp"
#include "crepe/smc/smc.hpp"

#include <spdlog/spdlog.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace crepe::harness {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string hash_line(const std::string& hash, std::uint64_t seed) {
    return "# config_hash=" + hash + ", seed=" + std::to_string(seed);
}

void write_json(const fs::path& p, const json& j) {
    std::ofstream os(p);
    if (!os) throw IoError("write-failed", "cannot write " + p.string());
    os << j.dump(2) << '\n';
    if (!os) throw IoError("write-failed", "cannot write " + p.string());
}

json read_json(const fs::path& p) {
    std::ifstream is(p);
    if (!is) throw IoError("read-failed", "cannot open " + p.string());
    try {
        return json::parse(is);
    } catch (const json::parse_error& e) {
        throw IoError("corrupt-file", p.string() + ": " + e.what());
    }
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("write-failed", "cannot create " + dir.string() + ": " + ec.message());
}

json stamped(const std::string& hash, std::uint64_t seed, json body) {
    body["config_hash"] = hash;
    body["seed"] = seed;
    return body;
}

json pt_diag_summary(const pt::Diagnostics& d) {
    json acc = json::array(), prob = json::array();
    for (std::size_t m = 1; m < d.proposals.size(); ++m) {
        acc.push_back(d.acceptance_rate(static_cast<int>(m)));
        prob.push_back(d.mean_accept_prob(static_cast<int>(m)));
    }
    return {{"swap_acceptance", acc},
            {"swap_accept_prob", prob},
            {"mean_accept_prob", d.mean_accept_prob()},
            {"round_trips", d.round_trips},
            {"rejected_degenerate", d.rejected_degenerate},
            {"nfe", pt::to_json(d.nfe)},
            {"nfe_path", d.nfe.path}};
}

template <class System>
RunArtifacts run_pt_system(System& sys, const json& resolved, const fs::path& out, const json* checkpoint,
                           std::optional<std::uint64_t> until) {
    const std::string hash = config_hash(resolved);
    auto ec = build_engine_config(resolved);
    if (until) ec.iterations = *until;
    const std::uint64_t every = resolved.at("engine").value("checkpoint_every", std::uint64_t{0});
    ensure_dir(out);
    const fs::path csv = out / "samples.csv";

    pt::PtEngine<System> engine(sys, ec);
    ReplicaEnsemble<typename System::State> ens;
    std::ofstream os;
    if (checkpoint) {
        ens = pt::restore_ensemble(sys, *checkpoint);
        engine.diagnostics() = pt::diagnostics_from_json(checkpoint->at("diagnostics"));
        if (ens.iteration > ec.iterations)
            throw ConfigError("invalid-config", "checkpoint is already past iteration " + std::to_string(ec.iterations));
        // Truncate rows past the checkpoint so the file matches an uninterrupted run.
        std::vector<std::string> keep;
        bool found_header = false;
        if (std::ifstream is(csv); is) {
            std::string line;
            while (std::getline(is, line)) {
                if (line.empty()) continue;
                if (line[0] == '#') {
                    if (line != hash_line(hash, ec.seed))
                        throw IoError("corrupt-checkpoint", "samples.csv belongs to a different configuration");
                    keep.push_back(line);
                    continue;
                }
                if (!found_header) {
                    found_header = true;
                    keep.push_back(line);
                    continue;
                }
                if (std::stoull(line.substr(0, line.find(','))) <= ens.iteration) keep.push_back(line);
            }
        }
        os.open(csv, std::ios::trunc);
        if (keep.empty()) {
            os << hash_line(hash, ec.seed) << '\n';
            sys.write_header(os);
        } else {
            for (const auto& l : keep) os << l << '\n';
        }
    } else {
        os.open(csv, std::ios::trunc);
        os << hash_line(hash, ec.seed) << '\n';
        sys.write_header(os);
        ens = engine.init_ensemble();
    }
    if (!os) throw IoError("write-failed", "cannot write " + csv.string());

    auto save_checkpoint = [&] {
        pt::write_checkpoint_file((out / "checkpoint.json").string(),
                                  pt::make_checkpoint(sys, ens, engine.diagnostics(), resolved, hash));
    };
    const auto t0 = Clock::now();
    engine.run(ens, ec.iterations, [&](std::uint64_t n, int id, const typename System::State& x) {
        if (n > ec.burn_in) {
            os << n << ',' << id;
            sys.write_state(os, x);
            os << '\n';
        }
        if (every > 0 && n % every == 0) {
            os.flush();
            save_checkpoint();
        }
    });
    const double wall = seconds_since(t0);
    os.close();
    if (!os) throw IoError("write-failed", "cannot write " + csv.string());
    save_checkpoint();

    RunArtifacts art;
    art.dir = out;
    art.config_hash = hash;
    art.diagnostics = stamped(hash, ec.seed, pt::to_json(engine.diagnostics()));
    art.diagnostics["iteration"] = ens.iteration;
    art.diagnostics["wall_time_s"] = wall;
    art.metrics = sample_metrics(resolved, read_samples(csv));
    art.metrics.update(pt_diag_summary(engine.diagnostics()));
    art.metrics["wall_time_s"] = wall;
    art.metrics["mode"] = "pt";
    art.metrics = stamped(hash, ec.seed, art.metrics);
    write_json(out / "diagnostics.json", art.diagnostics);
    write_json(out / "metrics.json", art.metrics);
    write_json(out / "resolved_config.json", stamped(hash, ec.seed, {{"config", resolved}}));
    spdlog::info("pt run finished: {} iterations in {:.2f}s, output {}", ens.iteration, wall, out.string());
    return art;
}

template <class System>
RunArtifacts run_smc_system(System& sys, const json& resolved, const fs::path& out) {
    const std::string hash = config_hash(resolved);
    auto sc = build_smc_config(resolved);
    const int batches = resolved.at("smc").value("batches", 1);
    if (batches < 1) throw ConfigError("invalid-config", "smc.batches must be >= 1");
    ensure_dir(out);
    const fs::path csv = out / "samples.csv";
    std::ofstream os(csv, std::ios::trunc);
    os << hash_line(hash, sc.seed) << '\n';
    {
        std::ostringstream hdr;
        sys.write_header(hdr);
        const std::string h = hdr.str();
        os << "particle,log_weight" << h.substr(h.find(',', h.find(',') + 1));
    }
    json batch_diag = json::array();
    pt::NfeCounters nfe;
    const auto t0 = Clock::now();
    const std::uint64_t base_seed = sc.seed;
    for (int b = 0; b < batches; ++b) {
        sc.seed = b == 0 ? base_seed : base_seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(b));
        auto res = smc::smc_run(sys, sc);
        nfe.path += res.nfe.path;
        nfe.completion += res.nfe.completion;
        nfe.reward += res.nfe.reward;
        const double lse = logsumexp(res.system.log_weights);
        for (int i = 0; i < sc.particles; ++i) {
            os << static_cast<std::uint64_t>(b) * sc.particles + i << ','
               << format_double(res.system.log_weights[i] - lse);
            sys.write_state(os, res.samples[i]);
            os << '\n';
        }
        double mean = 0.0, sq = 0.0;
        for (double v : res.terminal_increments) mean += v;
        mean /= sc.particles;
        for (double v : res.terminal_increments) sq += (v - mean) * (v - mean);
        batch_diag.push_back({{"batch", b},
                              {"seed", sc.seed},
                              {"ess_trace", res.system.ess_history},
                              {"final_ess", smc::ess(res.system.log_weights).normalized},
                              {"resample_levels", res.resample_levels},
                              {"increment_std", std::sqrt(sq / sc.particles)},
                              {"ancestry", res.system.ancestry},
                              {"nfe", pt::to_json(res.nfe)}});
    }
    const double wall = seconds_since(t0);
    os.close();
    if (!os) throw IoError("write-failed", "cannot write " + csv.string());

    RunArtifacts art;
    art.dir = out;
    art.config_hash = hash;
    art.diagnostics = stamped(hash, base_seed, {{"batches", batch_diag}, {"nfe", pt::to_json(nfe)}, {"wall_time_s", wall}});
    art.metrics = sample_metrics(resolved, read_samples(csv));
    json ess_trace = json::array();
    for (const auto& bd : batch_diag) ess_trace.push_back(bd.at("ess_trace"));
    art.metrics["ess_trace"] = ess_trace;
    art.metrics["final_ess"] = batch_diag.back().at("final_ess");
    art.metrics["increment_std"] = batch_diag.back().at("increment_std");
    art.metrics["nfe"] = pt::to_json(nfe);
    art.metrics["nfe_path"] = nfe.path;
    art.metrics["wall_time_s"] = wall;
    art.metrics["mode"] = "smc";
    art.metrics = stamped(hash, base_seed, art.metrics);
    write_json(out / "diagnostics.json", art.diagnostics);
    write_json(out / "metrics.json", art.metrics);
    write_json(out / "resolved_config.json", stamped(hash, base_seed, {{"config", resolved}}));
    spdlog::info("smc run finished: {} particles x {} batches in {:.2f}s, output {}", sc.particles, batches, wall,
                 out.string());
    return art;
}

json continuous_metrics(const json& resolved, const SampleTable& s) {
    json m;
    pt::GaussianSystem sys(build_gaussian_config(resolved));
    const int dim = sys.config().models.front()->dim();
    const auto& mc = resolved.at("metrics");
    if (dim == 1 && !s.states.empty()) {
        std::vector<double> xs;
        for (const auto& row : s.states) xs.push_back(row.at(0));
        const auto range = mc.at("range").get<std::vector<double>>();
        const int bins = mc.at("bins").get<int>();
        const double t0 = sys.grid().t_min();
        const double lo = range.at(0), hi = range.at(1);
        double peak = -INFINITY;
        for (int i = 0; i <= 400; ++i) peak = std::max(peak, sys.log_pi(Vec::Constant(1, lo + (hi - lo) * i / 400.0), t0));
        auto density = [&](double x) { return std::exp(sys.log_pi(Vec::Constant(1, x), t0) - peak); };
        m["tvd"] = tvd_histogram(xs, density, bins, lo, hi, s.weights);
        const auto occ = mode_occupancy(xs, 0.0, s.weights);
        m["mode_occupancy"] = {occ.below, occ.above};
        if (s.weights.empty()) {
            const auto ref = density_quantiles(density, lo, hi, static_cast<int>(xs.size()));
            m["w2"] = w2_1d(xs, ref);
        }
    }
    const auto* rt = sys.task().reward();
    const auto* stitch = rt ? dynamic_cast<const control::StitchReward*>(rt->reward.terminal.get()) : nullptr;
    if (stitch && !s.states.empty()) {
        const double thr = mc.at("stitch_threshold").get<double>();
        const std::size_t n = s.states.size();
        auto anchors = stitch->anchors();
        std::optional<std::uint64_t> event_at;
        const auto& events = sys.config().events;
        for (const auto& ev : events) {
            const auto* sr = dynamic_cast<const control::StitchReward*>(ev.reward.get());
            if (sr && sr->anchors().intermediate) {
                anchors.intermediate = sr->anchors().intermediate;
                event_at = ev.iteration;
            }
        }
        std::vector<StitchOutcome> outc(n);
        for (std::size_t i = 0; i < n; ++i)
            outc[i] = stitch_outcome(Eigen::Map<const Vec>(s.states[i].data(), static_cast<Eigen::Index>(s.states[i].size())),
                                     stitch->segments(), stitch->points(), anchors, thr);
        auto rate = [&](std::size_t a, std::size_t b, bool pass) {
            if (b <= a) return 0.0;
            double c = 0.0;
            for (std::size_t i = a; i < b; ++i) c += pass ? outc[i].pass_through : outc[i].success;
            return c / static_cast<double>(b - a);
        };
        json q = json::array();
        for (int k = 0; k < 4; ++k) q.push_back(rate(n * k / 4, n * (k + 1) / 4, false));
        json st = {{"success_rate", rate(0, n, false)}, {"success_quartiles", q}, {"threshold", thr}};
        if (event_at) {
            const std::uint64_t window = mc.value("event_window", std::uint64_t{2000});
            std::size_t pre_end = 0, post_end = 0;
            while (pre_end < n && s.iterations[pre_end] < *event_at) ++pre_end;
            post_end = pre_end;
            while (post_end < n && s.iterations[post_end] < *event_at + window) ++post_end;
            st["event_iteration"] = *event_at;
            st["pass_rate_pre_event"] = rate(0, pre_end, true);
            st["pass_rate_post_event"] = rate(pre_end, post_end, true);
            st["success_rate_post_event"] = rate(pre_end, post_end, false);
        }
        m["stitch"] = st;
    }
    return m;
}

json discrete_metrics(const json& resolved, const SampleTable& s) {
    json m;
    pt::CtmcSystem sys(build_ctmc_config(resolved));
    const auto& model = *sys.config().models.front();
    if (s.states.empty() || model.num_states() > 1000000) return m;
    const double t0 = sys.grid().t_min();
    std::vector<double> logp(model.num_states()), emp(model.num_states(), 0.0);
    for (std::size_t i = 0; i < logp.size(); ++i) logp[i] = sys.log_pi(model.state(i), t0);
    const double lse = logsumexp(logp);
    std::vector<double> exact(logp.size());
    for (std::size_t i = 0; i < logp.size(); ++i) exact[i] = std::exp(logp[i] - lse);
    for (std::size_t r = 0; r < s.states.size(); ++r) {
        Tokens x;
        for (double v : s.states[r]) x.push_back(static_cast<int>(v));
        emp[model.index(x)] += s.weights.empty() ? 1.0 : s.weights[r];
    }
    m["tvd"] = tvd_probs(emp, exact);
    return m;
}

}  // namespace

fs::path default_output_dir(const json& resolved, const std::string& mode) {
    const char* root = std::getenv(kOutputRootEnv);
    const fs::path base = root && *root ? fs::path(root) : fs::path("runs");
    return base / (mode + "-" + config_hash(resolved) + "-s" + std::to_string(resolved.at("seed").get<std::uint64_t>()));
}

RunArtifacts run_pt(const json& resolved, const fs::path& out) {
    if (is_discrete(resolved)) {
        pt::CtmcSystem sys(build_ctmc_config(resolved));
        return run_pt_system(sys, resolved, out, nullptr, std::nullopt);
    }
    pt::GaussianSystem sys(build_gaussian_config(resolved));
    return run_pt_system(sys, resolved, out, nullptr, std::nullopt);
}

RunArtifacts run_smc(const json& resolved, const fs::path& out) {
    if (is_discrete(resolved)) {
        pt::CtmcSystem sys(build_ctmc_config(resolved));
        return run_smc_system(sys, resolved, out);
    }
    pt::GaussianSystem sys(build_gaussian_config(resolved));
    return run_smc_system(sys, resolved, out);
}

RunArtifacts resume_pt(const fs::path& checkpoint, std::uint64_t iterations, const std::optional<fs::path>& out) {
    const json doc = pt::read_checkpoint_file(checkpoint.string());
    const auto header = pt::checkpoint_header(doc);
    json resolved;
    try {
        resolved = resolve_config(header.config);
    } catch (const ConfigError& e) {
        throw IoError("corrupt-checkpoint", std::string("stored config is invalid: ") + e.what());
    }
    if (config_hash(resolved) != header.config_hash)
        throw IoError("corrupt-checkpoint", "stored config does not match its hash");
    const fs::path dir = out ? *out : checkpoint.parent_path();
    if (is_discrete(resolved)) {
        pt::CtmcSystem sys(build_ctmc_config(resolved));
        return run_pt_system(sys, resolved, dir, &doc, iterations);
    }
    pt::GaussianSystem sys(build_gaussian_config(resolved));
    return run_pt_system(sys, resolved, dir, &doc, iterations);
}

SampleTable read_samples(const fs::path& csv) {
    std::ifstream is(csv);
    if (!is) throw IoError("read-failed", "cannot open " + csv.string());
    SampleTable t;
    std::string line;
    bool header = false;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            const auto h = line.find("config_hash="), s = line.find("seed=");
            if (h == std::string::npos || s == std::string::npos) throw IoError("corrupt-file", "bad comment line in samples");
            t.config_hash = line.substr(h + 12, line.find(',', h) - h - 12);
            t.seed = std::stoull(line.substr(s + 5));
            continue;
        }
        if (!header) {
            header = true;
            t.weighted = line.rfind("particle,log_weight", 0) == 0;
            continue;
        }
        std::stringstream ss(line);
        std::string cell;
        std::vector<double> row;
        try {
            std::getline(ss, cell, ',');
            t.iterations.push_back(std::stoull(cell));
            std::getline(ss, cell, ',');
            if (t.weighted) t.weights.push_back(std::stod(cell));
            while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        } catch (const std::exception&) {
            throw IoError("corrupt-file", "unparseable sample row: " + line);
        }
        t.states.push_back(std::move(row));
    }
    if (!header) throw IoError("corrupt-file", "samples file has no header: " + csv.string());
    if (t.weighted && !t.weights.empty()) {
        const double lse = logsumexp(t.weights);
        for (double& w : t.weights) w = std::exp(w - lse);
    }
    return t;
}

json sample_metrics(const json& resolved, const SampleTable& samples) {
    json m = is_discrete(resolved) ? discrete_metrics(resolved, samples) : continuous_metrics(resolved, samples);
    if (m.is_null()) m = json::object();
    m["n_samples"] = samples.states.size();
    if (samples.weighted && !samples.weights.empty()) {
        double s2 = 0.0;
        for (double w : samples.weights) s2 += w * w;
        m["ess"] = 1.0 / s2 / static_cast<double>(samples.weights.size());
    }
    return m;
}

json report_run(const fs::path& dir, std::ostream& table) {
    const json rc = read_json(dir / "resolved_config.json");
    const json resolved = resolve_config(rc.at("config"));
    const std::string hash = config_hash(resolved);
    const SampleTable s = read_samples(dir / "samples.csv");
    if (s.config_hash != hash) throw IoError("corrupt-file", "samples.csv does not match resolved_config.json");
    json m = sample_metrics(resolved, s);
    if (fs::exists(dir / "diagnostics.json")) {
        const json d = read_json(dir / "diagnostics.json");
        if (d.contains("proposals")) m.update(pt_diag_summary(pt::diagnostics_from_json(d)));
        else if (d.contains("nfe")) m["nfe"] = d.at("nfe");
    }
    m = stamped(hash, s.seed, m);

    table << hash_line(hash, s.seed) << '\n';
    if (!is_discrete(resolved) && !s.states.empty() && s.states.front().size() == 1) {
        const auto& mc = resolved.at("metrics");
        const auto range = mc.at("range").get<std::vector<double>>();
        const int bins = mc.at("bins").get<int>();
        std::vector<double> xs;
        for (const auto& row : s.states) xs.push_back(row[0]);
        pt::GaussianSystem sys(build_gaussian_config(resolved));
        const double t0 = sys.grid().t_min();
        auto h = histogram(xs, bins, range[0], range[1], s.weights);
        auto e = binned_density([&](double x) { return std::exp(sys.log_pi(Vec::Constant(1, x), t0)); }, bins, range[0],
                                range[1]);
        double sh = 0.0, se = 0.0;
        for (int b = 0; b <= bins; ++b) sh += h[b], se += e[b];
        const double width = (range[1] - range[0]) / bins;
        table << "bin_center,empirical,exact\n";
        for (int b = 0; b < bins; ++b)
            table << format_double(range[0] + (b + 0.5) * width) << ',' << format_double(h[b] / sh) << ','
                  << format_double(e[b] / se) << '\n';
    } else if (m.contains("swap_acceptance")) {
        table << "pair,acceptance\n";
        int k = 1;
        for (const auto& a : m.at("swap_acceptance")) table << k++ << ',' << format_double(a.get<double>()) << '\n';
    }
    return m;
}

}  // namespace crepe::harness
