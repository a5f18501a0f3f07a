#include "maestro/environment.hpp"

#include <algorithm>
#include <cstdlib>
#include <sstream>

#include <httplib.h>

#include "maestro/errors.hpp"
#include "maestro/protocol.hpp"
#include "maestro/text.hpp"

namespace maestro::env {

void GenConfig::validate() const {
    if (task_types.empty()) {
        throw Error(ErrorCode::EmptyMixture, "generator config declares no task types");
    }
    double total = 0.0;
    for (const auto& t : task_types) {
        if (t.weight < 0.0) {
            throw Error(ErrorCode::ConfigError, "mixture weight for '" + t.label + "' is negative");
        }
        total += t.weight;
    }
    if (total <= 0.0) {
        throw Error(ErrorCode::EmptyMixture, "mixture weights sum to zero");
    }
    if (answer_alphabet < 2) {
        throw Error(ErrorCode::ConfigError, "answer_alphabet must be at least 2");
    }
    if (direct_answer_rate < 0.0 || direct_answer_rate > 1.0) {
        throw Error(ErrorCode::ConfigError, "direct_answer_rate must be in [0,1]");
    }
    if (tag_dim < 1) {
        throw Error(ErrorCode::ConfigError, "tag_dim must be positive");
    }
    if (u_hi < 0.0 || u_hi > 1.0 || u_hi - gap < 0.0) {
        throw Error(ErrorCode::ConfigError, "utility levels must stay in [0,1]");
    }
    if (planted_assignment != "aligned" && planted_assignment != "shifted") {
        throw Error(ErrorCode::ConfigError, "planted_assignment must be aligned or shifted");
    }
}

GenConfig gen_config_from_json(const nlohmann::json& j) {
    GenConfig cfg;
    if (j.contains("task_types")) {
        for (const auto& t : j.at("task_types")) {
            TaskTypeSpec spec;
            if (t.is_string()) {
                spec.label = t.get<std::string>();
            } else {
                spec.label = t.at("label").get<std::string>();
                if (t.contains("domain_tags")) {
                    spec.domain_tags = t.at("domain_tags").get<std::vector<std::string>>();
                }
                spec.weight = t.value("weight", 1.0);
            }
            if (spec.domain_tags.empty()) spec.domain_tags = {spec.label};
            cfg.task_types.push_back(std::move(spec));
        }
    }
    cfg.answer_alphabet = j.value("answer_alphabet", cfg.answer_alphabet);
    cfg.direct_answer_rate = j.value("direct_answer_rate", cfg.direct_answer_rate);
    cfg.context_noise = j.value("context_noise", cfg.context_noise);
    cfg.tag_dim = j.value("tag_dim", cfg.tag_dim);
    cfg.u_hi = j.value("u_hi", cfg.u_hi);
    cfg.gap = j.value("gap", cfg.gap);
    cfg.planted_assignment = j.value("planted_assignment", cfg.planted_assignment);
    cfg.utility_seed = j.value("utility_seed", cfg.utility_seed);
    cfg.observation_token_limit = j.value("observation_token_limit", cfg.observation_token_limit);
    cfg.validate();
    return cfg;
}

nlohmann::json gen_config_to_json(const GenConfig& cfg) {
    nlohmann::json types = nlohmann::json::array();
    for (const auto& t : cfg.task_types) {
        types.push_back({{"label", t.label}, {"domain_tags", t.domain_tags}, {"weight", t.weight}});
    }
    return nlohmann::json{{"task_types", types},
                          {"answer_alphabet", cfg.answer_alphabet},
                          {"direct_answer_rate", cfg.direct_answer_rate},
                          {"context_noise", cfg.context_noise},
                          {"tag_dim", cfg.tag_dim},
                          {"u_hi", cfg.u_hi},
                          {"gap", cfg.gap},
                          {"planted_assignment", cfg.planted_assignment},
                          {"utility_seed", cfg.utility_seed},
                          {"observation_token_limit", cfg.observation_token_limit}};
}

double UtilityTable::at(const std::string& type, const std::string& model,
                        const std::string& skill) const {
    auto it = u.find(std::make_tuple(type, model, skill));
    if (it == u.end()) {
        throw Error(ErrorCode::UnknownTriple,
                    "no utility entry for (" + type + ", " + model + ", " + skill + ")");
    }
    return it->second;
}

bool UtilityTable::contains(const std::string& type, const std::string& model,
                            const std::string& skill) const {
    return u.count(std::make_tuple(type, model, skill)) > 0;
}

void UtilityTable::set(const std::string& type, const std::string& model,
                       const std::string& skill, double value) {
    u[std::make_tuple(type, model, skill)] = value;
}

std::vector<std::string> answer_alphabet(int n) {
    std::vector<std::string> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        std::ostringstream oss;
        oss << "ans" << (i < 10 ? "0" : "") << i;
        out.push_back(oss.str());
    }
    return out;
}

TaskInstance sample_task(const GenConfig& cfg, RngStream rng) {
    cfg.validate();
    TaskInstance task;

    std::vector<double> weights;
    weights.reserve(cfg.task_types.size());
    for (const auto& t : cfg.task_types) weights.push_back(t.weight);
    task.type_index = static_cast<int>(rng.child("type").categorical(weights));
    const TaskTypeSpec& spec = cfg.task_types[static_cast<std::size_t>(task.type_index)];
    task.task_type = spec.label;

    {
        std::ostringstream oss;
        oss << "task-" << std::hex << rng.child("id").next_u64();
        task.task_id = oss.str();
    }

    // Context encoding: indicator of the hashed domain tags plus uniform noise.
    task.context_features.assign(static_cast<std::size_t>(cfg.tag_dim), 0.0);
    auto noise = rng.child("noise");
    for (auto& x : task.context_features) x = cfg.context_noise * noise.next_unit();
    for (const auto& tag : spec.domain_tags) {
        auto bucket = RngStream::fnv1a64(tag) % static_cast<std::uint64_t>(cfg.tag_dim);
        task.context_features[static_cast<std::size_t>(bucket)] = 1.0;
    }

    auto alphabet = answer_alphabet(cfg.answer_alphabet);
    auto pick = rng.child("answer");
    task.gold_answer = alphabet[pick.next_below(alphabet.size())];
    task.direct_answer_rate = cfg.direct_answer_rate;

    auto guess = rng.child("guess");
    if (guess.bernoulli(cfg.direct_answer_rate)) {
        task.direct_guess = task.gold_answer;
    } else {
        auto idx = guess.next_below(alphabet.size() - 1);
        for (std::size_t i = 0, seen = 0; i < alphabet.size(); ++i) {
            if (alphabet[i] == task.gold_answer) continue;
            if (seen++ == idx) {
                task.direct_guess = alphabet[i];
                break;
            }
        }
    }
    return task;
}

std::string task_query(const TaskInstance& task) {
    return "solve this " + task.task_type + " problem";
}

PlantedPair planted_optimum(const GenConfig& cfg, const registry::Registry& reg, int type_index) {
    if (reg.models.empty() || reg.skills.empty()) {
        throw Error(ErrorCode::EmptyPool, "cannot plant an optimum in an empty registry");
    }
    auto m = static_cast<std::size_t>(type_index) % reg.models.size();
    auto shift = cfg.planted_assignment == "shifted" ? 1u : 0u;
    auto s = (static_cast<std::size_t>(type_index) + shift) % reg.skills.size();
    return PlantedPair{reg.models[m].id, reg.skills[s].id};
}

UtilityTable planted_utility_table(const GenConfig& cfg, const registry::Registry& reg) {
    cfg.validate();
    UtilityTable table;
    double base = cfg.u_hi - cfg.gap;
    for (int t = 0; t < static_cast<int>(cfg.task_types.size()); ++t) {
        const auto& label = cfg.task_types[static_cast<std::size_t>(t)].label;
        auto planted = planted_optimum(cfg, reg, t);
        for (const auto& m : reg.models) {
            for (const auto& s : reg.skills) {
                bool is_opt = m.id == planted.model_id && s.id == planted.skill_id;
                table.set(label, m.id, s.id, is_opt ? cfg.u_hi : base);
            }
        }
    }
    return table;
}

UtilityTable random_utility_table(const std::vector<std::string>& types,
                                  const registry::Registry& reg, RngStream rng) {
    UtilityTable table;
    for (const auto& type : types) {
        for (const auto& m : reg.models) {
            for (const auto& s : reg.skills) {
                auto stream = rng.child(type).child(m.id).child(s.id);
                table.set(type, m.id, s.id, stream.next_unit());
            }
        }
    }
    return table;
}

void plant_extension(UtilityTable& table, const GenConfig& cfg, const registry::Registry& extended,
                     const std::string& new_model_id, double value) {
    double base = cfg.u_hi - cfg.gap;
    for (int t = 0; t < static_cast<int>(cfg.task_types.size()); ++t) {
        const auto& label = cfg.task_types[static_cast<std::size_t>(t)].label;
        for (const auto& m : extended.models) {
            for (const auto& s : extended.skills) {
                if (!table.contains(label, m.id, s.id)) table.set(label, m.id, s.id, base);
            }
        }
        auto planted = planted_optimum(cfg, extended, t);
        table.set(label, new_model_id, planted.skill_id, value);
    }
}

std::string execute_search(const TaskInstance& task, const std::string& model_id,
                           const std::string& skill_l1_id, const registry::SkillL2& child,
                           const std::string& query, const UtilityTable& table,
                           const GenConfig& cfg, RngStream& rng) {
    (void)child;
    (void)query;
    double p = table.at(task.task_type, model_id, skill_l1_id);
    std::string payload;
    if (rng.bernoulli(p)) {
        payload = task.gold_answer;
    } else {
        auto alphabet = answer_alphabet(cfg.answer_alphabet);
        auto idx = rng.next_below(alphabet.size() - 1);
        for (std::size_t i = 0, seen = 0; i < alphabet.size(); ++i) {
            if (alphabet[i] == task.gold_answer) continue;
            if (seen++ == idx) {
                payload = alphabet[i];
                break;
            }
        }
    }
    std::string obs = std::string(kHintPrefix) + payload;
    return protocol::truncate_observation(obs, cfg.observation_token_limit);
}

bool judge_answer(const TaskInstance& task, std::string_view answer) {
    return text::normalize_ws(answer) == text::normalize_ws(task.gold_answer);
}

std::string answer_from_hint(const std::string& hint) {
    if (hint.starts_with(kHintPrefix)) return hint.substr(kHintPrefix.size());
    return hint;
}

std::string transport_sentinel(const std::string& reason) {
    return "[EXPERT_ERROR:TRANSPORT:" + reason + "]";
}

std::string call_live_expert(const std::string& endpoint, const std::string& model_id,
                             const std::string& skill_doc, const std::string& query,
                             std::chrono::milliseconds timeout, const std::string& auth_env) {
    httplib::Client client(endpoint);
    client.set_connection_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                                  (timeout % std::chrono::seconds(1)).count() * 1000);
    client.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(),
                            (timeout % std::chrono::seconds(1)).count() * 1000);

    nlohmann::json body{
        {"model", model_id},
        {"messages",
         {{{"role", "system"}, {"content", skill_doc}}, {{"role", "user"}, {"content", query}}}}};

    httplib::Headers headers;
    if (!auth_env.empty()) {
        if (const char* token = std::getenv(auth_env.c_str())) {
            headers.emplace("Authorization", std::string("Bearer ") + token);
        }
    }

    auto res = client.Post("/v1/chat/completions", headers, body.dump(), "application/json");
    if (!res) {
        auto err = httplib::to_string(res.error());
        if (res.error() == httplib::Error::ConnectionTimeout ||
            res.error() == httplib::Error::Read || res.error() == httplib::Error::Write) {
            return std::string(kTimeoutSentinel);
        }
        return transport_sentinel(err);
    }
    if (res->status != 200) {
        return transport_sentinel("http_" + std::to_string(res->status));
    }
    try {
        auto j = nlohmann::json::parse(res->body);
        return j.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception&) {
        return transport_sentinel("bad_response_body");
    }
}

std::string SyntheticExpert::call(const TaskInstance& task, const registry::ModelEntry& model,
                                  const registry::SkillL1& skill, const registry::SkillL2& child,
                                  const std::string& query, int episode_calls_so_far,
                                  RngStream& rng) {
    (void)episode_calls_so_far;
    return execute_search(task, model.id, skill.id, child, query, *table_, *cfg_, rng);
}

std::string LiveExpert::call(const TaskInstance& task, const registry::ModelEntry& model,
                             const registry::SkillL1& skill, const registry::SkillL2& child,
                             const std::string& query, int episode_calls_so_far, RngStream& rng) {
    (void)task;
    (void)rng;
    if (episode_calls_so_far >= budget_) return std::string(kBudgetSentinel);
    const auto* live = std::get_if<registry::LiveBackend>(&model.backend);
    if (!live) {
        return transport_sentinel("model_" + model.id + "_has_no_live_backend");
    }
    (void)skill;
    return call_live_expert(live->endpoint, model.id, child.doc, query, timeout_, live->auth_env);
}

Environment Environment::synthetic(GenConfig cfg, const registry::Registry& reg) {
    cfg.validate();
    Environment env;
    env.gen = std::move(cfg);
    env.table = planted_utility_table(env.gen, reg);
    return env;
}

std::string expert_call(const Environment& env, const TaskInstance& task,
                        const registry::ModelEntry& model, const registry::SkillL1& skill,
                        const registry::SkillL2& child, const std::string& query,
                        int episode_calls_so_far, RngStream& rng) {
    if (env.backend) {
        return env.backend->call(task, model, skill, child, query, episode_calls_so_far, rng);
    }
    return execute_search(task, model.id, skill.id, child, query, env.table, env.gen, rng);
}

} // namespace maestro::env
