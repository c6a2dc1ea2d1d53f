#pragma once
// Run manifests: every CLI invocation records its command, resolved
// configuration, input hashes, seed and output files next to the outputs.

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "config.hpp"
#include "errors.hpp"

namespace nfr {

inline std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InvalidParameters("cannot hash missing file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64(ss.str());
}

struct RunManifest {
    std::string command;
    nlohmann::json config;  // resolved flag values
    std::uint64_t config_hash = 0;
    std::vector<std::pair<std::string, std::uint64_t>> inputs;  // path, content hash
    std::uint64_t seed = 0;
    std::string version = kVersion;
    double wall_time_s = 0;
    std::vector<std::string> outputs;

    void add_input(const std::string& path) { inputs.emplace_back(path, hash_file(path)); }

    nlohmann::json to_json() const {
        nlohmann::json j;
        j["command"] = command;
        j["config"] = config;
        j["config_hash"] = config_hash;
        nlohmann::json in = nlohmann::json::array();
        for (const auto& [path, hash] : inputs) in.push_back({{"path", path}, {"hash", hash}});
        j["inputs"] = in;
        j["seed"] = seed;
        j["version"] = version;
        j["wall_time_s"] = wall_time_s;
        j["outputs"] = outputs;
        return j;
    }

    void finalize_and_write(const std::string& path) {
        config_hash = fnv1a64(config.dump());
        std::ofstream out(path, std::ios::binary);
        if (!out) throw InvalidParameters("cannot write manifest: " + path);
        out << to_json().dump(2) << "\n";
    }
};

}  // namespace nfr
