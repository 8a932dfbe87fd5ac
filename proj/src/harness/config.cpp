#include "crepe/harness/config.hpp"

#include "crepe/core/errors.hpp"
#include "crepe/models/gaussian_mixture.hpp"

#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace crepe::harness {

namespace {

Vec to_vec(const json& j) {
    const auto v = j.get<std::vector<double>>();
    return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

Eigen::Vector2d to_point(const json& j) {
    const auto v = j.get<std::vector<double>>();
    if (v.size() != 2) throw ConfigError("invalid-config", "anchor points must have two coordinates");
    return {v[0], v[1]};
}

template <class F>
auto guarded(const std::string& where, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const json::exception& e) {
        throw ConfigError("invalid-config", where + ": " + e.what());
    }
}

models::NoiseSchedule build_noise(const json& spec) {
    const std::string kind = spec.value("kind", "edm");
    if (kind == "edm") return models::NoiseSchedule::edm();
    if (kind == "constant") {
        const double s = spec.at("sigma").get<double>();
        if (!(s > 0.0)) throw ConfigError("invalid-config", "constant noise needs sigma > 0");
        return models::NoiseSchedule::constant(s);
    }
    throw ConfigError("invalid-config", "unknown noise schedule '" + kind + "'");
}

void require_keys(const json& obj, const std::set<std::string>& allowed, const std::string& where) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) throw ConfigError("invalid-config", "unknown key '" + it.key() + "' in " + where);
}

}  // namespace

json default_config() {
    return json::parse(R"({
      "seed": 0,
      "models": [{"kind": "bimodal"}],
      "task": {"kind": "tempering", "beta": 1.0},
      "grid": {"kind": "edm", "t_min": 0.001, "t_max": 10.0, "n_steps": 128, "rho": 7.0,
               "substeps": 4, "truncation_time": 0.001},
      "engine": {"iterations": 1000, "burn_in": 20, "local_move": "off", "resample_top": false,
                 "use_reference": false, "workers": 1, "mh_proposal": "uniform", "checkpoint_every": 0},
      "kernel": {"floor": 1e-8, "renormalize": true, "strict": false},
      "smc": {"particles": 1000, "resampling": "partial", "fraction": 0.8, "ess_threshold": 0.2, "batches": 1},
      "events": [],
      "metrics": {"bins": 64, "range": [-4.0, 4.0], "stitch_threshold": 0.45, "event_window": 2000}
    })");
}

json load_config_file(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("read-failed", "cannot open config file: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    try {
        return json::parse(ss.str());
    } catch (const json::parse_error& e) {
        throw ConfigError("invalid-config", std::string("config is not valid JSON: ") + e.what());
    }
}

json merge(json base, const json& patch) {
    if (!base.is_object() || !patch.is_object()) return patch;
    for (auto it = patch.begin(); it != patch.end(); ++it) base[it.key()] = merge(base.value(it.key(), json()), it.value());
    return base;
}

void apply_override(json& cfg, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("invalid-config", "override must be path=value: " + assignment);
    const std::string path = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &cfg;
    std::size_t start = 0;
    while (true) {
        const auto dot = path.find('.', start);
        const std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (key.empty()) throw ConfigError("invalid-config", "empty path segment in override: " + path);
        if (node->is_array()) {
            std::size_t idx = 0;
            try {
                idx = std::stoul(key);
            } catch (...) {
                throw ConfigError("invalid-config", "array index expected at '" + key + "' in " + path);
            }
            if (idx >= node->size()) throw ConfigError("invalid-config", "array index out of range in " + path);
            node = &(*node)[idx];
        } else {
            if (!node->is_object() && !node->is_null()) throw ConfigError("invalid-config", "cannot descend into " + path);
            node = &(*node)[key];
        }
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    *node = value;
}

std::string config_hash(const json& resolved) {
    // FNV-1a over the canonical (key-sorted) dump.
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : resolved.dump()) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::vector<std::string> diff_summary(const json& a, const json& b, const std::string& prefix) {
    std::vector<std::string> out;
    if (a.is_object() && b.is_object()) {
        std::set<std::string> keys;
        for (auto it = a.begin(); it != a.end(); ++it) keys.insert(it.key());
        for (auto it = b.begin(); it != b.end(); ++it) keys.insert(it.key());
        for (const auto& k : keys) {
            const std::string p = prefix.empty() ? k : prefix + "." + k;
            if (!a.contains(k)) out.push_back("+ " + p + " = " + b[k].dump());
            else if (!b.contains(k)) out.push_back("- " + p + " (was " + a[k].dump() + ")");
            else {
                auto sub = diff_summary(a[k], b[k], p);
                out.insert(out.end(), sub.begin(), sub.end());
            }
        }
    } else if (a != b) {
        out.push_back("~ " + (prefix.empty() ? std::string("<root>") : prefix) + ": " + a.dump() + " -> " + b.dump());
    }
    return out;
}

models::ModelPtr build_continuous_model(const json& spec) {
    return guarded("model", [&]() -> models::ModelPtr {
        const std::string kind = spec.at("kind").get<std::string>();
        const auto noise = build_noise(spec.value("noise", json::object()));
        if (kind == "bimodal") return std::make_shared<models::GaussianMixtureModel>(models::default_bimodal(noise));
        if (kind == "mixture") {
            std::vector<models::Component> comps;
            for (const auto& c : spec.at("components"))
                comps.push_back({c.at("weight").get<double>(), to_vec(c.at("mean")), c.at("var").get<double>()});
            auto m = std::make_shared<models::GaussianMixtureModel>(std::move(comps), noise);
            m->label = spec.value("label", "mixture");
            return m;
        }
        if (kind == "segments") {
            models::SegmentShapeConfig sc;
            sc.points = spec.value("points", sc.points);
            sc.directions = spec.value("directions", sc.directions);
            sc.lengths = spec.value("lengths", sc.lengths);
            sc.point_var = spec.value("point_var", sc.point_var);
            sc.offset_var = spec.value("offset_var", sc.offset_var);
            const int J = spec.value("segments", 1);
            if (J < 1) throw ConfigError("invalid-config", "segments must be >= 1");
            auto seg = std::make_shared<models::GaussianMixtureModel>(models::segment_model(sc, noise));
            if (J == 1) return seg;
            return std::make_shared<models::ProductModel>(std::vector<models::ModelPtr>(J, seg));
        }
        throw ConfigError("invalid-config", "unknown continuous model kind '" + kind + "'");
    });
}

std::shared_ptr<const models::ExactDiscreteModel> build_discrete_model(const json& spec) {
    return guarded("model", [&]() -> std::shared_ptr<const models::ExactDiscreteModel> {
        const int vocab = spec.at("vocab").get<int>();
        std::shared_ptr<models::ExactDiscreteModel> m;
        if (spec.contains("joint"))
            m = std::make_shared<models::ExactDiscreteModel>(vocab, spec.at("length").get<int>(),
                                                             spec.at("joint").get<std::vector<double>>());
        else
            m = std::make_shared<models::ExactDiscreteModel>(models::ExactDiscreteModel::factorized(
                vocab, spec.at("per_position").get<std::vector<std::vector<double>>>()));
        m->label = spec.value("label", "discrete");
        return m;
    });
}

std::shared_ptr<const control::TerminalReward> build_reward(const json& spec, int dim) {
    return guarded("reward", [&]() -> std::shared_ptr<const control::TerminalReward> {
        const std::string kind = spec.at("kind").get<std::string>();
        if (kind == "linear") {
            Vec a = to_vec(spec.at("a"));
            if (a.size() != dim) throw ConfigError("invalid-config", "linear reward dimension mismatch");
            return std::make_shared<control::LinearReward>(a, spec.value("b", 0.0));
        }
        if (kind == "gaussian_well") {
            Vec c = to_vec(spec.at("center"));
            if (c.size() != dim) throw ConfigError("invalid-config", "reward center dimension mismatch");
            return std::make_shared<control::GaussianWellReward>(c, spec.at("scale").get<double>(),
                                                                 spec.value("strength", 1.0));
        }
        if (kind == "stitch") {
            const int J = spec.at("segments").get<int>();
            const int L = spec.value("points", 8);
            if (2 * J * L != dim) throw ConfigError("invalid-config", "stitch reward does not match the model dimension");
            models::StitchAnchors anchors{to_point(spec.at("origin")), to_point(spec.at("target")), std::nullopt};
            if (spec.contains("intermediate") && !spec.at("intermediate").is_null())
                anchors.intermediate = to_point(spec.at("intermediate"));
            auto w = models::StitchWeights::defaults_for(J);
            if (spec.contains("weights")) {
                const auto& ws = spec.at("weights");
                w.lambda_o = ws.value("lambda_o", w.lambda_o);
                w.lambda_p = ws.value("lambda_p", w.lambda_p);
                w.lambda_n = ws.value("lambda_n", w.lambda_n);
                w.lambda_i = ws.value("lambda_i", w.lambda_i);
                w.lambda_l1 = ws.value("lambda_l1", w.lambda_l1);
                w.lambda_l2 = ws.value("lambda_l2", w.lambda_l2);
                w.tau = ws.value("tau", w.tau);
            }
            return std::make_shared<control::StitchReward>(J, L, anchors, w);
        }
        throw ConfigError("invalid-config", "unknown reward kind '" + kind + "'");
    });
}

TimeGrid build_grid(const json& spec) {
    return guarded("grid", [&] {
        const std::string kind = spec.at("kind").get<std::string>();
        const double t_min = spec.at("t_min").get<double>(), t_max = spec.at("t_max").get<double>();
        const int n = spec.at("n_steps").get<int>();
        std::vector<double> times;
        if (kind == "edm") times = edm_times(t_min, t_max, n, spec.value("rho", 7.0));
        else if (kind == "uniform") times = uniform_times(t_min, t_max, n);
        else throw ConfigError("invalid-config", "unknown grid kind '" + kind + "'");
        return make_grid(std::move(times), spec.value("substeps", 1), spec.value("truncation_time", t_min));
    });
}

control::ControlTask build_task(const json& spec, int dim) {
    return guarded("task", [&] {
        const std::string kind = spec.at("kind").get<std::string>();
        control::ControlTask task;
        if (kind == "tempering") task.variant = control::Tempering{spec.at("beta").get<double>()};
        else if (kind == "composition") task.variant = control::Composition{spec.value("count", 2)};
        else if (kind == "cfg") {
            const double w = spec.at("w").get<double>();
            task.variant = control::CfgDebias{w, spec.value("w_prop", w)};
        } else if (kind == "reward") {
            control::RewardTilt rt;
            rt.reward.terminal = build_reward(spec.at("reward"), dim);
            rt.schedule.rho = spec.value("rho", 5.0);
            rt.gradient_in_proposal = spec.value("gradient_in_proposal", true);
            if (rt.gradient_in_proposal && !rt.reward.has_gradient()) {
                spdlog::info("reward '{}' has no gradient; using the score-only proposal", rt.reward.terminal->name());
                rt.gradient_in_proposal = false;
            }
            task.variant = std::move(rt);
        } else
            throw ConfigError("invalid-config", "unknown task kind '" + kind + "'");
        return task;
    });
}

bool is_discrete(const json& resolved) {
    const auto& ms = resolved.at("models");
    return !ms.empty() && ms.at(0).value("kind", "") == "discrete";
}

json resolve_config(const json& user) {
    if (!user.is_object()) throw ConfigError("invalid-config", "config must be a JSON object");
    json cfg = user;
    if (cfg.contains("model")) {
        if (cfg.contains("models")) throw ConfigError("invalid-config", "give either 'model' or 'models', not both");
        cfg["models"] = json::array({cfg["model"]});
        cfg.erase("model");
    }
    json resolved = merge(default_config(), cfg);
    // lists replace rather than merge
    if (cfg.contains("models")) resolved["models"] = cfg["models"];
    if (cfg.contains("events")) resolved["events"] = cfg["events"];
    require_keys(resolved, {"seed", "models", "task", "grid", "engine", "kernel", "smc", "events", "metrics", "label"},
                 "config");
    require_keys(resolved["engine"], {"iterations", "burn_in", "local_move", "resample_top", "use_reference", "workers", "checkpoint_every",
                                      "mh_proposal"},
                 "engine");
    require_keys(resolved["kernel"], {"floor", "renormalize", "strict"}, "kernel");
    require_keys(resolved["smc"], {"particles", "resampling", "fraction", "ess_threshold", "batches"}, "smc");
    if (!resolved["models"].is_array() || resolved["models"].empty())
        throw ConfigError("invalid-config", "'models' must be a non-empty list");
    if (!resolved["seed"].is_number_integer()) throw ConfigError("invalid-config", "seed must be an integer");
    // Build everything once so schema errors surface before any compute.
    if (is_discrete(resolved)) build_ctmc_config(resolved);
    else build_gaussian_config(resolved);
    build_engine_config(resolved);
    build_smc_config(resolved);
    return resolved;
}

pt::GaussianSystemConfig build_gaussian_config(const json& r) {
    pt::GaussianSystemConfig c;
    for (const auto& m : r.at("models")) c.models.push_back(build_continuous_model(m));
    const int dim = c.models.front()->dim();
    c.task = build_task(r.at("task"), dim);
    c.grid = build_grid(r.at("grid"));
    guarded("engine", [&] {
        const auto& e = r.at("engine");
        const std::string lm = e.at("local_move").get<std::string>();
        if (lm == "off") c.local_move = pt::LocalMove::off;
        else if (lm == "ula") c.local_move = pt::LocalMove::ula;
        else throw ConfigError("invalid-config", "local_move for continuous models must be off or ula");
        c.resample_top = e.at("resample_top").get<bool>();
        c.use_reference = e.at("use_reference").get<bool>();
        return 0;
    });
    for (const auto& ev : r.at("events")) {
        guarded("events", [&] {
            c.events.push_back({ev.at("iteration").get<std::uint64_t>(), build_reward(ev.at("reward"), dim)});
            return 0;
        });
    }
    pt::GaussianSystem probe(c);  // validates task/model/event compatibility
    return c;
}

pt::CtmcSystemConfig build_ctmc_config(const json& r) {
    pt::CtmcSystemConfig c;
    for (const auto& m : r.at("models")) {
        if (m.value("kind", "") != "discrete") throw ConfigError("invalid-config", "cannot mix discrete and continuous models");
        c.models.push_back(build_discrete_model(m));
    }
    c.task = build_task(r.at("task"), c.models.front()->length());
    c.grid = build_grid(r.at("grid"));
    if (!r.at("events").empty()) throw ConfigError("invalid-config", "online events need a reward task");
    guarded("engine", [&] {
        const auto& e = r.at("engine");
        const std::string lm = e.at("local_move").get<std::string>();
        if (lm == "off") c.local_move = pt::LocalMove::off;
        else if (lm == "ctmc_mh") c.local_move = pt::LocalMove::ctmc_mh;
        else throw ConfigError("invalid-config", "local_move for discrete models must be off or ctmc_mh");
        const std::string prop = e.at("mh_proposal").get<std::string>();
        if (prop == "uniform") c.mh_proposal = pt::MhProposal::uniform;
        else if (prop == "masking") c.mh_proposal = pt::MhProposal::masking;
        else throw ConfigError("invalid-config", "mh_proposal must be uniform or masking");
        c.resample_top = e.at("resample_top").get<bool>();
        const auto& k = r.at("kernel");
        c.kernel.floor = k.at("floor").get<double>();
        c.kernel.renormalize = k.at("renormalize").get<bool>();
        c.kernel.strict = k.at("strict").get<bool>();
        return 0;
    });
    pt::CtmcSystem probe(c);
    return c;
}

pt::EngineConfig build_engine_config(const json& r) {
    return guarded("engine", [&] {
        const auto& e = r.at("engine");
        pt::EngineConfig c;
        c.iterations = e.at("iterations").get<std::uint64_t>();
        c.burn_in = e.at("burn_in").get<std::uint64_t>();
        c.seed = r.at("seed").get<std::uint64_t>();
        c.workers = e.at("workers").get<int>();
        if (c.workers < 1) throw ConfigError("invalid-config", "workers must be >= 1");
        if (c.iterations > 0 && c.burn_in > c.iterations) throw ConfigError("invalid-config", "burn_in must not exceed iterations");
        return c;
    });
}

smc::SmcConfig build_smc_config(const json& r) {
    return guarded("smc", [&] {
        const auto& s = r.at("smc");
        smc::SmcConfig c;
        c.particles = s.at("particles").get<int>();
        const std::string mode = s.at("resampling").get<std::string>();
        if (mode == "none") c.resampling = smc::Resampling::none;
        else if (mode == "systematic") c.resampling = smc::Resampling::systematic;
        else if (mode == "partial") c.resampling = smc::Resampling::partial;
        else throw ConfigError("invalid-config", "resampling must be none, systematic or partial");
        c.fraction = s.at("fraction").get<double>();
        c.ess_threshold = s.at("ess_threshold").get<double>();
        c.seed = r.at("seed").get<std::uint64_t>();
        c.workers = r.at("engine").at("workers").get<int>();
        if (c.particles < 1) throw ConfigError("invalid-config", "particles must be >= 1");
        if (!(c.fraction > 0.0 && c.fraction <= 1.0)) throw ConfigError("invalid-config", "fraction must be in (0, 1]");
        if (!(c.ess_threshold > 0.0 && c.ess_threshold <= 1.0))
            throw ConfigError("invalid-config", "ess_threshold must be in (0, 1]");
        return c;
    });
}

}  // namespace crepe::harness
