#include "kt/manifest.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kt {

namespace {

std::string hex16(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

}  // namespace

std::uint64_t fnv1a_hash(std::string_view bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

std::string file_content_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read '" + path + "' for hashing");
    std::ostringstream buf;
    buf << in.rdbuf();
    return "fnv1a:" + hex16(fnv1a_hash(buf.str()));
}

void to_json(nlohmann::json& j, const RunManifest& m) {
    j = nlohmann::json{{"tool_version", m.tool_version}, {"subcommand", m.subcommand},
                       {"seed", m.seed},                 {"config", m.config},
                       {"inputs", m.inputs},             {"outputs", m.outputs}};
}

void from_json(const nlohmann::json& j, RunManifest& m) {
    j.at("tool_version").get_to(m.tool_version);
    j.at("subcommand").get_to(m.subcommand);
    j.at("seed").get_to(m.seed);
    m.config = j.at("config");
    j.at("inputs").get_to(m.inputs);
    j.at("outputs").get_to(m.outputs);
}

std::string manifest_hash(const RunManifest& manifest) {
    const nlohmann::json j = manifest;
    return "fnv1a:" + hex16(fnv1a_hash(j.dump()));
}

}  // namespace kt
