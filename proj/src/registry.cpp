#include "maestro/registry.hpp"

#include <fstream>
#include <set>
#include <unordered_set>

#include "maestro/errors.hpp"
#include "maestro/text.hpp"

namespace maestro::registry {

namespace {

void require_field(const nlohmann::json& j, const char* key, const std::string& where) {
    if (!j.contains(key)) {
        throw Error(ErrorCode::SchemaError, where + " is missing required field '" + key + "'");
    }
}

std::vector<std::string> string_array(const nlohmann::json& j, const char* key,
                                      const std::string& where) {
    std::vector<std::string> out;
    if (!j.contains(key)) return out;
    if (!j.at(key).is_array()) {
        throw Error(ErrorCode::SchemaError, where + "." + key + " must be an array of strings");
    }
    for (const auto& item : j.at(key)) {
        if (!item.is_string()) {
            throw Error(ErrorCode::SchemaError, where + "." + key + " must be an array of strings");
        }
        out.push_back(item.get<std::string>());
    }
    return out;
}

Backend parse_backend(const nlohmann::json& j, const std::string& where) {
    if (!j.contains("backend")) return SyntheticBackend{};
    const auto& b = j.at("backend");
    require_field(b, "type", where + ".backend");
    std::string type = b.at("type").get<std::string>();
    if (type == "synthetic") return SyntheticBackend{};
    if (type == "live") {
        require_field(b, "endpoint", where + ".backend");
        LiveBackend live;
        live.endpoint = b.at("endpoint").get<std::string>();
        live.auth_env = b.value("auth_env", std::string{});
        return live;
    }
    throw Error(ErrorCode::SchemaError, where + ".backend.type must be 'synthetic' or 'live'");
}

ModelEntry parse_model(const nlohmann::json& j) {
    require_field(j, "id", "model");
    ModelEntry m;
    m.id = j.at("id").get<std::string>();
    std::string where = "model '" + m.id + "'";
    m.description = j.value("description", std::string{});
    m.capability_tags = string_array(j, "capability_tags", where);
    if (m.capability_tags.empty()) {
        throw Error(ErrorCode::SchemaError, where + " must declare capability_tags");
    }
    m.backend = parse_backend(j, where);
    return m;
}

SkillL2 parse_skill_l2(const nlohmann::json& j, const std::string& parent) {
    require_field(j, "id", parent + " child");
    SkillL2 s;
    s.id = j.at("id").get<std::string>();
    std::string where = parent + " child '" + s.id + "'";
    for (auto& kw : string_array(j, "keywords", where)) {
        s.keywords.push_back(text::to_lower(kw));
    }
    s.doc = j.value("doc", std::string{});
    return s;
}

SkillL1 parse_skill_l1(const nlohmann::json& j) {
    require_field(j, "id", "skill");
    SkillL1 s;
    s.id = j.at("id").get<std::string>();
    std::string where = "skill '" + s.id + "'";
    s.description = j.value("description", std::string{});
    std::string mode = j.value("routing_mode", std::string("keyword"));
    if (mode == "keyword") {
        s.routing_mode = RoutingMode::Keyword;
    } else if (mode == "classifier") {
        s.routing_mode = RoutingMode::Classifier;
    } else {
        throw Error(ErrorCode::SchemaError, where + ".routing_mode must be keyword or classifier");
    }
    require_field(j, "children", where);
    for (const auto& child : j.at("children")) {
        s.children.push_back(parse_skill_l2(child, where));
    }
    if (s.children.empty()) {
        throw Error(ErrorCode::SchemaError, where + " must have at least one Level-2 child");
    }
    s.default_child = j.value("default_child", 0);
    if (s.default_child < 0 || s.default_child >= static_cast<int>(s.children.size())) {
        throw Error(ErrorCode::SchemaError, where + ".default_child out of range");
    }
    for (int i = 0; i < static_cast<int>(s.children.size()); ++i) {
        if (s.children[i].keywords.empty() && i != s.default_child) {
            throw Error(ErrorCode::SchemaError,
                        where + " child '" + s.children[i].id +
                            "' has no keywords and is not the default child");
        }
    }
    s.capability_tags = string_array(j, "capability_tags", where);
    return s;
}

void check_invariants(const Registry& reg) {
    if (reg.models.empty()) throw Error(ErrorCode::EmptyPool, "registry has no models");
    if (reg.skills.empty()) throw Error(ErrorCode::EmptyPool, "registry has no skills");
    std::unordered_set<std::string> ids;
    auto claim = [&](const std::string& id, const char* what) {
        if (!ids.insert(id).second) {
            throw Error(ErrorCode::DuplicateId, std::string(what) + " id '" + id + "' is not unique");
        }
    };
    for (const auto& m : reg.models) claim(m.id, "model");
    for (const auto& s : reg.skills) {
        claim(s.id, "skill");
        for (const auto& c : s.children) claim(c.id, "level-2 skill");
    }
}

} // namespace

const ModelEntry* Registry::find_model(std::string_view id) const {
    for (const auto& m : models) {
        if (m.id == id) return &m;
    }
    return nullptr;
}

const SkillL1* Registry::find_skill(std::string_view id) const {
    for (const auto& s : skills) {
        if (s.id == id) return &s;
    }
    return nullptr;
}

int Registry::model_index(std::string_view id) const {
    for (std::size_t i = 0; i < models.size(); ++i) {
        if (models[i].id == id) return static_cast<int>(i);
    }
    return -1;
}

int Registry::skill_index(std::string_view id) const {
    for (std::size_t i = 0; i < skills.size(); ++i) {
        if (skills[i].id == id) return static_cast<int>(i);
    }
    return -1;
}

std::size_t Registry::total_level2() const {
    std::size_t n = 0;
    for (const auto& s : skills) n += s.children.size();
    return n;
}

Registry load_registry(const nlohmann::json& config) {
    if (!config.is_object()) {
        throw Error(ErrorCode::SchemaError, "registry config must be a JSON object");
    }
    require_field(config, "models", "registry");
    require_field(config, "skills", "registry");
    Registry reg;
    reg.version = config.value("version", 1);
    for (const auto& m : config.at("models")) reg.models.push_back(parse_model(m));
    for (const auto& s : config.at("skills")) reg.skills.push_back(parse_skill_l1(s));
    check_invariants(reg);
    return reg;
}

Registry load_registry_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open registry file " + path.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError,
                    "registry file " + path.string() + " is not valid JSON: " + e.what());
    }
    return load_registry(j);
}

void validate_registry_json(const nlohmann::json& config) { (void)load_registry(config); }

nlohmann::json to_json(const Registry& reg) {
    nlohmann::json j;
    j["version"] = reg.version;
    j["models"] = nlohmann::json::array();
    for (const auto& m : reg.models) {
        nlohmann::json mj{{"id", m.id},
                          {"description", m.description},
                          {"capability_tags", m.capability_tags}};
        if (const auto* live = std::get_if<LiveBackend>(&m.backend)) {
            mj["backend"] = {{"type", "live"}, {"endpoint", live->endpoint},
                             {"auth_env", live->auth_env}};
        } else {
            mj["backend"] = {{"type", "synthetic"}};
        }
        j["models"].push_back(std::move(mj));
    }
    j["skills"] = nlohmann::json::array();
    for (const auto& s : reg.skills) {
        nlohmann::json sj{{"id", s.id},
                          {"description", s.description},
                          {"routing_mode",
                           s.routing_mode == RoutingMode::Keyword ? "keyword" : "classifier"},
                          {"default_child", s.default_child},
                          {"capability_tags", s.capability_tags}};
        sj["children"] = nlohmann::json::array();
        for (const auto& c : s.children) {
            sj["children"].push_back(
                {{"id", c.id}, {"keywords", c.keywords}, {"doc", c.doc}});
        }
        j["skills"].push_back(std::move(sj));
    }
    return j;
}

const SkillL2& route_level2(const SkillL1& skill, const std::string& query,
                            const ClassifierOracle* classifier) {
    if (skill.routing_mode == RoutingMode::Classifier && classifier && *classifier) {
        std::string child_id = (*classifier)(skill, query);
        for (const auto& c : skill.children) {
            if (c.id == child_id) return c;
        }
        // Unknown answer from the classifier: fall through to keyword routing.
    }
    auto tokens = text::lower_token_set(query);
    std::size_t best_hits = 0;
    const SkillL2* best = nullptr;
    for (const auto& c : skill.children) {
        std::size_t hits = 0;
        std::set<std::string> seen(c.keywords.begin(), c.keywords.end());
        for (const auto& kw : seen) {
            if (tokens.count(kw)) ++hits;
        }
        if (hits > best_hits) {
            best_hits = hits;
            best = &c;
        }
    }
    if (!best) return skill.children[skill.default_child];
    return *best;
}

Registry extend_registry(const Registry& reg, const std::vector<ModelEntry>& new_models,
                         const std::vector<SkillL1>& new_skills) {
    Registry out = reg;
    for (const auto& m : new_models) out.models.push_back(m);
    for (const auto& s : new_skills) out.skills.push_back(s);
    out.version = reg.version + 1;
    check_invariants(out);
    return out;
}

CompressionStats compression_stats(const Registry& reg) {
    CompressionStats stats;
    auto models = static_cast<std::int64_t>(reg.models.size());
    stats.ratio_num = static_cast<std::int64_t>(reg.total_level2());
    stats.ratio_den = static_cast<std::int64_t>(reg.skills.size());
    stats.flat_size = models * stats.ratio_num;
    stats.hier_size = models * stats.ratio_den;
    return stats;
}

std::vector<const SkillL1*> baseline_retrieve(const Registry& reg, const std::string& query,
                                              std::size_t k) {
    if (k < 1) throw Error(ErrorCode::ConfigError, "baseline_retrieve requires k >= 1");
    auto tokens = text::lower_token_set(query);
    std::vector<std::pair<std::size_t, const SkillL1*>> scored;
    for (const auto& s : reg.skills) {
        std::set<std::string> keywords;
        for (const auto& c : s.children) keywords.insert(c.keywords.begin(), c.keywords.end());
        std::size_t hits = 0;
        for (const auto& kw : keywords) {
            if (tokens.count(kw)) ++hits;
        }
        scored.emplace_back(hits, &s);
    }
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    std::vector<const SkillL1*> out;
    for (std::size_t i = 0; i < scored.size() && i < k; ++i) out.push_back(scored[i].second);
    return out;
}

} // namespace maestro::registry
