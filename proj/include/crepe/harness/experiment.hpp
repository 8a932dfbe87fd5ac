#pragma once

#include "crepe/harness/config.hpp"

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace crepe::harness {

namespace fs = std::filesystem;

inline constexpr const char* kOutputRootEnv = "CREPE_OUTPUT_ROOT";

struct RunArtifacts {
    fs::path dir;
    std::string config_hash;
    json metrics;
    json diagnostics;
};

// $CREPE_OUTPUT_ROOT (or ./runs) / <mode>-<hash>-s<seed>
fs::path default_output_dir(const json& resolved, const std::string& mode);

RunArtifacts run_pt(const json& resolved, const fs::path& out);
RunArtifacts run_smc(const json& resolved, const fs::path& out);
// Continues a PT run from its checkpoint to `iterations` total, appending to the run's samples.
RunArtifacts resume_pt(const fs::path& checkpoint, std::uint64_t iterations, const std::optional<fs::path>& out);

// Samples as stored on disk.
struct SampleTable {
    std::string config_hash;
    std::uint64_t seed = 0;
    bool weighted = false;  // SMC output: second column holds log-weights
    std::vector<std::uint64_t> iterations;
    std::vector<double> weights;  // normalized, empty for PT
    std::vector<std::vector<double>> states;
};

SampleTable read_samples(const fs::path& csv);
// Sample-based metrics against the exact level-0 target of the resolved config.
json sample_metrics(const json& resolved, const SampleTable& samples);
// Recomputes metrics from a run directory and writes plot-ready histogram rows to `table`.
json report_run(const fs::path& dir, std::ostream& table);

}  // namespace crepe::harness
