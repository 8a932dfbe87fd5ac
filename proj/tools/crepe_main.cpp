#include "crepe/core/errors.hpp"
#include "crepe/harness/config.hpp"
#include "crepe/harness/experiment.hpp"
#include "crepe/harness/verify.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

using namespace crepe;
using namespace crepe::harness;

namespace {

struct RunArgs {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> workers;
    std::vector<std::string> sets;
};

void add_run_options(CLI::App* cmd, RunArgs& a) {
    cmd->add_option("--config", a.config, "experiment config (JSON)")->required();
    cmd->add_option("--seed", a.seed, "override the config seed");
    cmd->add_option("--out", a.out, "output directory");
    cmd->add_option("--workers", a.workers, "cap on engine worker threads");
    cmd->add_option("--set", a.sets, "dotted-path override, e.g. engine.iterations=500")->take_all();
}

json resolve_from_args(const RunArgs& a) {
    json cfg = load_config_file(a.config);
    for (const auto& s : a.sets) apply_override(cfg, s);
    if (a.seed) cfg["seed"] = *a.seed;
    if (a.workers) cfg["engine"]["workers"] = *a.workers;
    return resolve_config(cfg);
}

void print_summary(const RunArtifacts& art) {
    std::cout << "output: " << art.dir.string() << '\n'
              << "config_hash: " << art.config_hash << '\n'
              << art.metrics.dump(2) << '\n';
}

int report_error(const Error& e) {
    const json err = {{"error", e.kind()}, {"message", e.what()}};
    std::cerr << err.dump() << '\n';
    return static_cast<int>(e.code());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crepe: replica-exchange and SMC control of analytic diffusion models"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error, off");

    RunArgs run_args, smc_args;
    auto* run = app.add_subcommand("run", "parallel tempering run");
    add_run_options(run, run_args);
    auto* smc = app.add_subcommand("smc", "sequential Monte Carlo baseline run");
    add_run_options(smc, smc_args);

    std::string suite;
    std::uint64_t verify_seed = 0;
    auto* ver = app.add_subcommand("verify", "run an oracle suite");
    auto* suite_opt = ver->add_option("--suite", suite, "suite name");
    ver->add_option("--seed", verify_seed, "seed for randomized suites");
    bool list_suites = false;
    ver->add_flag("--list", list_suites, "list available suites");

    std::string checkpoint;
    std::uint64_t iterations = 0;
    std::optional<std::string> resume_out;
    auto* res = app.add_subcommand("resume", "continue a PT run from its checkpoint");
    res->add_option("--checkpoint", checkpoint, "checkpoint.json of a previous run")->required();
    res->add_option("--iterations", iterations, "total iteration count to reach")->required();
    res->add_option("--out", resume_out, "output directory (default: the checkpoint's directory)");

    std::string report_dir, report_table;
    auto* rep = app.add_subcommand("report", "recompute metrics from a run directory");
    rep->add_option("--run", report_dir, "run directory")->required();
    rep->add_option("--table", report_table, "write plot-ready rows here instead of stdout");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : static_cast<int>(ExitCode::config);
    }
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*run) {
            const json resolved = resolve_from_args(run_args);
            const fs::path out = run_args.out ? fs::path(*run_args.out) : default_output_dir(resolved, "pt");
            print_summary(run_pt(resolved, out));
        } else if (*smc) {
            const json resolved = resolve_from_args(smc_args);
            const fs::path out = smc_args.out ? fs::path(*smc_args.out) : default_output_dir(resolved, "smc");
            print_summary(run_smc(resolved, out));
        } else if (*ver) {
            if (list_suites || !*suite_opt) {
                for (const auto& s : verify_suites()) std::cout << s << '\n';
                return list_suites ? 0 : static_cast<int>(ExitCode::config);
            }
            const auto r = verify(suite, verify_seed);
            std::cout << "suite " << r.suite << '\n' << r.table << (r.passed ? "PASS" : "FAIL") << '\n';
            return r.passed ? 0 : 1;
        } else if (*res) {
            std::optional<fs::path> out;
            if (resume_out) out = fs::path(*resume_out);
            print_summary(resume_pt(checkpoint, iterations, out));
        } else if (*rep) {
            json m;
            if (report_table.empty()) {
                m = report_run(report_dir, std::cout);
            } else {
                std::ofstream os(report_table);
                if (!os) throw IoError("write-failed", "cannot write " + report_table);
                m = report_run(report_dir, os);
            }
            std::cerr << m.dump(2) << '\n';
        }
    } catch (const Error& e) {
        return report_error(e);
    } catch (const std::exception& e) {
        std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
        return 1;
    }
    return 0;
}
