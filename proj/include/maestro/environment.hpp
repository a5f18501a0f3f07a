#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "maestro/registry.hpp"
#include "maestro/rng.hpp"

namespace maestro::env {

struct TaskTypeSpec {
    std::string label;
    std::vector<std::string> domain_tags; // defaults to {label}
    double weight = 1.0;
};

// Synthetic world generator settings.
struct GenConfig {
    std::vector<TaskTypeSpec> task_types;
    int answer_alphabet = 10;       // gold + distractors
    double direct_answer_rate = 0.1; // p0: success rate of answering with no search
    double context_noise = 0.05;    // uniform noise added to the context encoding
    int tag_dim = 32;               // hashed tag space shared with the policy featurizer
    double u_hi = 0.9;              // planted optimum utility
    double gap = 0.3;               // all other pairs sit at u_hi - gap
    // "aligned": type j's optimum is (model j, skill j) mod pool sizes.
    // "shifted": the optimal skill index is shifted by one, so keyword overlap
    // points at the wrong skill for every type.
    std::string planted_assignment = "aligned";
    std::uint64_t utility_seed = 0;
    std::size_t observation_token_limit = 1024;

    void validate() const;
};

GenConfig gen_config_from_json(const nlohmann::json& j);
nlohmann::json gen_config_to_json(const GenConfig& cfg);

struct TaskInstance {
    std::string task_id;
    std::string task_type; // categorical label
    int type_index = 0;
    std::vector<double> context_features; // in [0,1]; noisy encoding of the domain tags
    std::string gold_answer;
    double direct_answer_rate = 0.1;
    // Pre-drawn direct-answer text: equals gold with probability p0, otherwise
    // a distractor. Emitting it realizes the "answer without searching" rate.
    std::string direct_guess;
};

// Ground-truth success probability of each (task type, model, Level-1 skill)
// triple. The oracle behind every theory diagnostic.
struct UtilityTable {
    std::map<std::tuple<std::string, std::string, std::string>, double> u;

    double at(const std::string& type, const std::string& model, const std::string& skill) const;
    bool contains(const std::string& type, const std::string& model,
                  const std::string& skill) const;
    void set(const std::string& type, const std::string& model, const std::string& skill,
             double value);
};

std::vector<std::string> answer_alphabet(int n);

// Deterministic given (config, rng stream).
TaskInstance sample_task(const GenConfig& cfg, RngStream rng);

// Natural-language form of the task, used by retrieval baselines and query
// templates.
std::string task_query(const TaskInstance& task);

struct PlantedPair {
    std::string model_id;
    std::string skill_id;
};

// The (m*, s*) planted for a task type under cfg.planted_assignment.
PlantedPair planted_optimum(const GenConfig& cfg, const registry::Registry& reg, int type_index);

// u_hi at the planted pair, u_hi - gap everywhere else.
UtilityTable planted_utility_table(const GenConfig& cfg, const registry::Registry& reg);

// Independent uniform utilities; for randomized theory checks.
UtilityTable random_utility_table(const std::vector<std::string>& types,
                                  const registry::Registry& reg, RngStream rng);

// Fills the triples an extension added (baseline u_hi - gap), then plants
// `value` at (new model, per-type optimal skill) for every type.
void plant_extension(UtilityTable& table, const GenConfig& cfg, const registry::Registry& extended,
                     const std::string& new_model_id, double value);

// One synthetic expert call: gold hint with probability U[type, model, skill],
// otherwise a distractor hint. Truncated to the configured token limit.
std::string execute_search(const TaskInstance& task, const std::string& model_id,
                           const std::string& skill_l1_id, const registry::SkillL2& child,
                           const std::string& query, const UtilityTable& table,
                           const GenConfig& cfg, RngStream& rng);

bool judge_answer(const TaskInstance& task, std::string_view answer);

inline constexpr std::string_view kHintPrefix = "HINT:";

// Strips the hint prefix when present; hints double as candidate answers.
std::string answer_from_hint(const std::string& hint);

// Live-expert error sentinels. Failures are observations, never aborts.
inline constexpr std::string_view kTimeoutSentinel = "[EXPERT_ERROR:TIMEOUT]";
inline constexpr std::string_view kBudgetSentinel = "[EXPERT_ERROR:BUDGET_EXHAUSTED]";
std::string transport_sentinel(const std::string& reason);

// One chat-completion request: system message = skill doc, user message =
// query. Returns the assistant text or an error sentinel.
std::string call_live_expert(const std::string& endpoint, const std::string& model_id,
                             const std::string& skill_doc, const std::string& query,
                             std::chrono::milliseconds timeout, const std::string& auth_env = {});

// Expert dispatch used by rollouts. Synthetic by default; the live variant
// enforces a per-episode call budget.
class ExpertBackend {
public:
    virtual ~ExpertBackend() = default;
    virtual std::string call(const TaskInstance& task, const registry::ModelEntry& model,
                             const registry::SkillL1& skill, const registry::SkillL2& child,
                             const std::string& query, int episode_calls_so_far,
                             RngStream& rng) = 0;
};

class SyntheticExpert final : public ExpertBackend {
public:
    SyntheticExpert(const UtilityTable& table, const GenConfig& cfg)
        : table_(&table), cfg_(&cfg) {}
    std::string call(const TaskInstance& task, const registry::ModelEntry& model,
                     const registry::SkillL1& skill, const registry::SkillL2& child,
                     const std::string& query, int episode_calls_so_far, RngStream& rng) override;

private:
    const UtilityTable* table_;
    const GenConfig* cfg_;
};

class LiveExpert final : public ExpertBackend {
public:
    LiveExpert(std::chrono::milliseconds timeout, int per_episode_budget)
        : timeout_(timeout), budget_(per_episode_budget) {}
    std::string call(const TaskInstance& task, const registry::ModelEntry& model,
                     const registry::SkillL1& skill, const registry::SkillL2& child,
                     const std::string& query, int episode_calls_so_far, RngStream& rng) override;

private:
    std::chrono::milliseconds timeout_;
    int budget_;
};

// Everything a rollout needs: the generator settings, the ground-truth table
// and the expert dispatch. When no backend is set, calls go to the synthetic
// oracle backed by `table`.
struct Environment {
    GenConfig gen;
    UtilityTable table;
    std::shared_ptr<ExpertBackend> backend;

    static Environment synthetic(GenConfig cfg, const registry::Registry& reg);
};

std::string expert_call(const Environment& env, const TaskInstance& task,
                        const registry::ModelEntry& model, const registry::SkillL1& skill,
                        const registry::SkillL2& child, const std::string& query,
                        int episode_calls_so_far, RngStream& rng);

// Rollout-time episode state. `trace` is the serialized trajectory so far.
struct EpisodeState {
    TaskInstance task;
    std::string trace;
    std::optional<std::string> latest_hint;
    int turn = 0;
};

} // namespace maestro::env
