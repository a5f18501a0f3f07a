#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "maestro/environment.hpp"
#include "maestro/registry.hpp"
#include "maestro/rng.hpp"

namespace maestro::policy {

// The orchestrator is a factorized categorical policy with five decision
// heads. Act-type, query-template and answer-mode heads are linear in the
// full state features (task context, turn one-hot, hint indicator). Model and
// skill heads score registry entries bilinearly through hashed capability-tag
// features against the task-context block alone: routing depends on what the
// task is, not on where in the episode the policy stands, which keeps the
// routing decision identifiable from terminal rewards. Entries added later
// are scorable with the same parameters (no retraining on registry
// extension).

enum class ActType { Think = 0, Search = 1, Answer = 2 };
enum class AnswerMode { EmitLatestHint = 0, EmitFixedGuess = 1 };

enum class Head { ActType = 0, Model = 1, Skill = 2, QueryTemplate = 3, AnswerMode = 4, Observation = 5 };
inline constexpr int kPolicyHeads = 5;

std::string_view head_name(Head head);

struct FeatureLayout {
    int tag_dim = 32;   // hashed capability-tag space, shared with the env encoding
    int task_dim = 32;  // length of TaskInstance::context_features
    int t_max = 4;
    int query_templates = 2;

    int state_dim() const { return task_dim + (t_max + 1) + 1; }

    bool operator==(const FeatureLayout&) const = default;
};

// Hashed indicator of a tag set.
Eigen::VectorXd tag_features(std::span<const std::string> tags, int tag_dim);

// Per-registry featurization (tag matrices do not depend on episode state).
struct RegistryFeatures {
    int version = 0;
    Eigen::MatrixXd model_tags; // |M| x tag_dim
    Eigen::MatrixXd skill_tags; // |K1| x tag_dim
};

std::shared_ptr<const RegistryFeatures> registry_features(const registry::Registry& reg,
                                                          const FeatureLayout& layout);

struct ContextFeatures {
    int registry_version = 0;
    Eigen::VectorXd state; // [task context | turn one-hot | hint-received]
    std::shared_ptr<const RegistryFeatures> reg;
    Eigen::VectorXd model_scores; // capability-tag match per model
    Eigen::VectorXd skill_scores;

    // Flat view (state then entry scores); used by invariants and bindings.
    Eigen::VectorXd flat() const;
};

ContextFeatures featurize(const env::EpisodeState& state, const registry::Registry& reg,
                          const FeatureLayout& layout);
ContextFeatures featurize(const env::EpisodeState& state,
                          std::shared_ptr<const RegistryFeatures> reg_features,
                          const FeatureLayout& layout);

struct PolicyParameters {
    FeatureLayout layout;
    int base_registry_version = 1;
    Eigen::MatrixXd w_act;    // 3 x state_dim
    Eigen::MatrixXd w_model;  // tag_dim x task_dim
    Eigen::MatrixXd w_skill;  // tag_dim x task_dim
    Eigen::MatrixXd w_query;  // query_templates x state_dim
    Eigen::MatrixXd w_answer; // 2 x state_dim

    static PolicyParameters zeros(const FeatureLayout& layout, int registry_version);

    void set_zero();
    void add_scaled(const PolicyParameters& other, double scale);
    double max_abs() const;

    Eigen::MatrixXd& head_matrix(Head head);
    const Eigen::MatrixXd& head_matrix(Head head) const;
};

struct DecisionRecord {
    Head head;
    int chosen = 0;
    double log_prob = 0.0;
    bool masked = false; // environment-injected; never contributes to the loss
    int turn = 0;
};

// Raw logits for one head at the given features.
Eigen::VectorXd head_logits(const PolicyParameters& theta, const ContextFeatures& f, Head head);

// log softmax(logits / temperature)
Eigen::VectorXd log_softmax(const Eigen::VectorXd& logits, double temperature);

double head_entropy(const PolicyParameters& theta, const ContextFeatures& f, Head head,
                    double temperature);

struct PolicyAction {
    ActType type = ActType::Think;
    int model_index = -1;
    int skill_index = -1;
    int query_template = -1;
    AnswerMode answer_mode = AnswerMode::EmitLatestHint;
    std::string model_id;
    std::string skill_id;
    std::string query_text;
    std::string answer_text;
    std::string think_text;
};

// Renders the template texts (queries, thinks, answers) for an action whose
// indices have been chosen. Needs the episode state for the latest hint and
// the task label.
void render_action_text(PolicyAction& action, const env::EpisodeState& state,
                        const registry::Registry& reg);

std::pair<PolicyAction, std::vector<DecisionRecord>> sample_action(
    const PolicyParameters& theta, const ContextFeatures& f, const registry::Registry& reg,
    const env::EpisodeState& state, double temperature, RngStream& rng);

// Recomputes the per-head log-probs sample_action would have recorded for an
// action. The head sequence is determined by the action type.
std::vector<DecisionRecord> action_log_prob(const PolicyParameters& theta,
                                            const ContextFeatures& f, const PolicyAction& action,
                                            double temperature);

double head_log_prob(const PolicyParameters& theta, const ContextFeatures& f, Head head,
                     int chosen, double temperature);

PolicyAction greedy_action(const PolicyParameters& theta, const ContextFeatures& f,
                           const registry::Registry& reg, const env::EpisodeState& state);

// Accumulates coeff * d(log p(chosen | head, f)) / d(theta) into grad.
void accumulate_log_prob_grad(const PolicyParameters& theta, const ContextFeatures& f,
                              const DecisionRecord& record, double coeff, double temperature,
                              PolicyParameters& grad);

// Checkpoints: flat JSON (head name -> matrix) with the feature layout and
// registry version embedded. Loading refuses a mismatched layout.
void save_checkpoint(const PolicyParameters& theta, const std::filesystem::path& path);
PolicyParameters load_checkpoint(const std::filesystem::path& path);

} // namespace maestro::policy
