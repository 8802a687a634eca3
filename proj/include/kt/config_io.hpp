#pragma once

#include "json.hpp"

#include "kt/features.hpp"
#include "kt/model.hpp"
#include "kt/synth.hpp"
#include "kt/trainer.hpp"

namespace kt {

// ADL hooks so nlohmann::json converts configs implicitly.
void to_json(nlohmann::json& j, const StandardStats& s);
void from_json(const nlohmann::json& j, StandardStats& s);

void to_json(nlohmann::json& j, const StandardizationStats& s);
void from_json(const nlohmann::json& j, StandardizationStats& s);

void to_json(nlohmann::json& j, const FeatureConfig& c);
void from_json(const nlohmann::json& j, FeatureConfig& c);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

void to_json(nlohmann::json& j, const SynthConfig& c);
void from_json(const nlohmann::json& j, SynthConfig& c);

// Output paths and the manifest hash are wired by the caller, not part of
// the serialized form.
void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

/// Overlay the keys of `user` onto the serialized defaults of T and parse
/// the result back, so config files may state only the fields they change.
/// Unknown keys raise invalid_argument naming the section.
template <typename T>
T config_with_overrides(const nlohmann::json& user, const char* section) {
    nlohmann::json merged = T{};
    if (!user.is_object()) {
        throw std::invalid_argument(std::string("config section '") + section +
                                    "' must be an object");
    }
    for (const auto& [key, value] : user.items()) {
        if (!merged.contains(key)) {
            throw std::invalid_argument(std::string("unknown key '") + key + "' in config section '" +
                                        section + "'");
        }
        (void)value;
    }
    merged.merge_patch(user);
    return merged.get<T>();
}

}  // namespace kt
