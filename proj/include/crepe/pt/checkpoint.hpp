#pragma once

#include "crepe/core/errors.hpp"
#include "crepe/core/types.hpp"
#include "crepe/pt/diagnostics.hpp"

#include <json.hpp>

#include <string>

namespace crepe::pt {

inline constexpr int kCheckpointVersion = 1;

struct CheckpointHeader {
    std::string config_hash;
    nlohmann::json config;
    std::uint64_t iteration = 0;
};

void write_checkpoint_file(const std::string& path, const nlohmann::json& doc);
// Parses and validates format/version; throws IoError on any defect.
nlohmann::json read_checkpoint_file(const std::string& path);
CheckpointHeader checkpoint_header(const nlohmann::json& doc);

template <class System>
nlohmann::json make_checkpoint(const System& sys, const ReplicaEnsemble<typename System::State>& ens,
                               const Diagnostics& diag, const nlohmann::json& config, const std::string& config_hash) {
    nlohmann::json states = nlohmann::json::array();
    for (const auto& s : ens.states) states.push_back(sys.state_to_json(s));
    return {{"format", "crepe-checkpoint"},
            {"version", kCheckpointVersion},
            {"config_hash", config_hash},
            {"config", config},
            {"iteration", ens.iteration},
            {"states", states},
            {"replica_ids", ens.replica_ids},
            {"diagnostics", to_json(diag)}};
}

template <class System>
ReplicaEnsemble<typename System::State> restore_ensemble(const System& sys, const nlohmann::json& doc) {
    ReplicaEnsemble<typename System::State> ens;
    try {
        for (const auto& s : doc.at("states")) ens.states.push_back(sys.state_from_json(s));
        ens.replica_ids = doc.at("replica_ids").get<std::vector<int>>();
        ens.iteration = doc.at("iteration").get<std::uint64_t>();
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt-checkpoint", e.what());
    }
    if (ens.num_levels() != sys.num_levels() + 1 || ens.replica_ids.size() != ens.states.size() ||
        !is_permutation_of_levels(ens.replica_ids))
        throw IoError("corrupt-checkpoint", "ensemble does not match the configured ladder");
    return ens;
}

}  // namespace crepe::pt
