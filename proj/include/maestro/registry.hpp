#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

namespace maestro::registry {

// Expert backends. Synthetic experts answer from a utility table; live ones
// are OpenAI-compatible chat-completions endpoints.
struct SyntheticBackend {
    bool operator==(const SyntheticBackend&) const = default;
};

struct LiveBackend {
    std::string endpoint;
    std::string auth_env; // environment variable holding the bearer token

    bool operator==(const LiveBackend&) const = default;
};

using Backend = std::variant<SyntheticBackend, LiveBackend>;

struct ModelEntry {
    std::string id;
    std::string description;
    std::vector<std::string> capability_tags; // non-empty; the policy routes on these
    Backend backend = SyntheticBackend{};
};

struct SkillL2 {
    std::string id;
    std::vector<std::string> keywords; // lowercase; may be empty only for the default child
    std::string doc;                   // injected as the expert system prompt
};

enum class RoutingMode { Keyword, Classifier };

struct SkillL1 {
    std::string id;
    std::string description;
    RoutingMode routing_mode = RoutingMode::Keyword;
    std::vector<SkillL2> children; // non-empty
    int default_child = 0;
    std::vector<std::string> capability_tags; // policy-facing descriptors, like models
};

// Immutable once loaded. Extension produces a new value with version + 1.
struct Registry {
    std::vector<ModelEntry> models;
    std::vector<SkillL1> skills;
    int version = 1;

    const ModelEntry* find_model(std::string_view id) const;
    const SkillL1* find_skill(std::string_view id) const;
    int model_index(std::string_view id) const;  // -1 when absent
    int skill_index(std::string_view id) const;
    std::size_t total_level2() const;
};

// Classifier-mode Level-2 routing delegates to an oracle with a one-shot
// "choose child id" contract. Returning an unknown id falls back to keywords.
using ClassifierOracle = std::function<std::string(const SkillL1&, const std::string& query)>;

Registry load_registry(const nlohmann::json& config);
Registry load_registry_file(const std::filesystem::path& path);

// Schema/invariant check without keeping the result.
void validate_registry_json(const nlohmann::json& config);

nlohmann::json to_json(const Registry& reg);

// Keyword mode: largest whole-token intersection between child keywords and
// the lowercased query, ties by child order, zero matches -> default child.
const SkillL2& route_level2(const SkillL1& skill, const std::string& query,
                            const ClassifierOracle* classifier = nullptr);

Registry extend_registry(const Registry& reg, const std::vector<ModelEntry>& new_models,
                         const std::vector<SkillL1>& new_skills);

struct CompressionStats {
    std::int64_t flat_size; // |M| * |K2|
    std::int64_t hier_size; // |M| * |K1|
    std::int64_t ratio_num; // |K2|
    std::int64_t ratio_den; // |K1|
};

CompressionStats compression_stats(const Registry& reg);

// Top-k Level-1 skills by keyword overlap with the query (union of child
// keywords); deterministic ties by registry order. The static-retrieval
// comparison baseline.
std::vector<const SkillL1*> baseline_retrieve(const Registry& reg, const std::string& query,
                                              std::size_t k);

} // namespace maestro::registry
