#include "crepe/pt/checkpoint.hpp"

#include <fstream>
#include <sstream>

namespace crepe::pt {

void write_checkpoint_file(const std::string& path, const nlohmann::json& doc) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw IoError("write-failed", "cannot open checkpoint for writing: " + path);
        os << doc.dump(1) << '\n';
        if (!os) throw IoError("write-failed", "checkpoint write failed: " + path);
    }
    if (std::rename(tmp.c_str(), path.c_str()) != 0) throw IoError("write-failed", "cannot move checkpoint into place: " + path);
}

nlohmann::json read_checkpoint_file(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("read-failed", "cannot open checkpoint: " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw IoError("corrupt-checkpoint", std::string("unparseable checkpoint: ") + e.what());
    }
    if (!doc.is_object() || doc.value("format", "") != "crepe-checkpoint")
        throw IoError("corrupt-checkpoint", "not a crepe checkpoint");
    if (doc.value("version", -1) != kCheckpointVersion)
        throw IoError("version-mismatch", "checkpoint version " + std::to_string(doc.value("version", -1)) +
                                              " but this build reads version " + std::to_string(kCheckpointVersion));
    for (const char* key : {"config_hash", "config", "iteration", "states", "replica_ids", "diagnostics"})
        if (!doc.contains(key)) throw IoError("corrupt-checkpoint", std::string("missing field ") + key);
    return doc;
}

CheckpointHeader checkpoint_header(const nlohmann::json& doc) {
    try {
        return {doc.at("config_hash").get<std::string>(), doc.at("config"), doc.at("iteration").get<std::uint64_t>()};
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt-checkpoint", e.what());
    }
}

}  // namespace crepe::pt
