#pragma once

#include <json.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace crepe::harness {

struct VerifyReport {
    std::string suite;
    bool passed = false;
    std::string table;  // human-readable convergence / violation table
    nlohmann::json details;
};

const std::vector<std::string>& verify_suites();
// Throws ConfigError("unknown-suite") listing the available suites.
VerifyReport verify(const std::string& suite, std::uint64_t seed = 0);

// Building blocks shared with the acceptance checks.
struct RneConvergenceRow {
    double dt = 0.0;
    double mean_abs_error = 0.0;
    double mean_error = 0.0;
};
std::vector<RneConvergenceRow> rne_identity_table(const std::vector<double>& dts, int paths, std::uint64_t seed);

}  // namespace crepe::harness
