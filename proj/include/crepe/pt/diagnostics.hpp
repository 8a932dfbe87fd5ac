#pragma once

#include <json.hpp>

#include <cstdint>
#include <vector>

namespace crepe::pt {

struct NfeCounters {
    std::uint64_t path = 0;        // proposal-path score bundles; M*K*N for PT
    std::uint64_t init = 0;
    std::uint64_t completion = 0;
    std::uint64_t local = 0;
    std::uint64_t reward = 0;      // reward endpoint evaluations

    std::uint64_t total() const { return path + init + completion + local + reward; }
};

struct Diagnostics {
    // Index m refers to the level pair (m-1, m); entry 0 unused.
    std::vector<std::uint64_t> proposals;
    std::vector<std::uint64_t> accepted;
    std::vector<double> accept_prob_sum;
    std::uint64_t round_trips = 0;
    std::vector<int> replica_phase;  // per replica: 0 unseen, 1 last extreme was level 0, 2 last extreme was level M
    std::uint64_t rejected_degenerate = 0;
    NfeCounters nfe;

    void resize(int levels);
    double acceptance_rate(int m) const;
    double mean_accept_prob(int m) const;
    double mean_accept_prob() const;  // averaged over pairs that were proposed
};

nlohmann::json to_json(const NfeCounters& n);
NfeCounters nfe_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Diagnostics& d);
Diagnostics diagnostics_from_json(const nlohmann::json& j);

}  // namespace crepe::pt
