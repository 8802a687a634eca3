#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace kt {

inline constexpr const char* kToolVersion = "0.1.0";

std::uint64_t fnv1a_hash(std::string_view bytes);

/// "fnv1a:<16 hex digits>" over the file's bytes. Errors if unreadable.
std::string file_content_hash(const std::string& path);

/// Reproducibility record written next to every run's outputs. Artifacts
/// embed manifest_hash(manifest) so they can be traced to the exact config
/// and inputs that produced them.
struct RunManifest {
    std::string tool_version = kToolVersion;
    std::string subcommand;
    std::uint64_t seed = 0;
    nlohmann::json config;                      // full flag/config snapshot
    std::map<std::string, std::string> inputs;  // path -> content hash
    std::vector<std::string> outputs;
};

void to_json(nlohmann::json& j, const RunManifest& m);
void from_json(const nlohmann::json& j, RunManifest& m);

/// Hash of the canonical JSON dump (sorted keys, no whitespace).
std::string manifest_hash(const RunManifest& manifest);

}  // namespace kt
