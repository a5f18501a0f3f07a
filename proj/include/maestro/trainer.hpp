#pragma once

#include <array>
#include <span>
#include <vector>

#include <json.hpp>

#include "maestro/environment.hpp"
#include "maestro/policy.hpp"
#include "maestro/protocol.hpp"
#include "maestro/registry.hpp"
#include "maestro/rewards.hpp"
#include "maestro/rng.hpp"

namespace maestro::trainer {

struct TrainConfig {
    int group_size = 8;       // G
    int t_max = 4;            // interaction horizon
    double clip_eps = 0.2;    // ratios clipped to [0.8, 1.2]
    double dual_clip = 3.0;   // floor for negative-advantage objectives
    double adv_epsilon = 1e-6;
    double learning_rate = 0.1;
    int steps = 500;
    int batch_size = 8; // tasks per update
    double temperature = 1.0;
    int epochs_per_batch = 1; // >1 reuses a batch off-policy (ratios active)
    int workers = 1;
    std::uint64_t seed = 0;
    int checkpoint_every = 200;
    bool log_trajectories = false;
    bool disable_format_reward = false; // reward-ablation switch: train on r_ans only

    void validate() const;
};

TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json train_config_to_json(const TrainConfig& cfg);

// One finished episode with everything the update needs.
struct TrajectoryRecord {
    std::string raw;
    protocol::ParsedTrajectory parsed;
    std::vector<policy::ContextFeatures> turn_features; // indexed by DecisionRecord::turn
    std::vector<policy::DecisionRecord> records;
    rewards::RewardBreakdown reward; // training reward (format term may be ablated)
    bool format_clean = true;        // validator verdict, independent of ablation
};

struct RolloutGroup {
    env::TaskInstance task;
    std::vector<TrajectoryRecord> trajectories;
};

struct AdvantageVector {
    std::vector<double> a;
    double mean_reward = 0.0;
    double std_reward = 0.0; // population standard deviation
    double epsilon = 0.0;
};

// Runs one episode of the orchestration loop: sample an action; think appends
// a reasoning block, search executes the (model, skill, query) triple, routes
// Level-2 and injects the wrapped observation as a masked record, answer
// terminates. Hard stop at t_max turns.
TrajectoryRecord run_episode(const policy::PolicyParameters& theta, const env::Environment& env,
                             const registry::Registry& reg,
                             std::shared_ptr<const policy::RegistryFeatures> reg_features,
                             const env::TaskInstance& task, const TrainConfig& cfg, RngStream rng,
                             bool greedy = false);

// G independent episodes of the same task on disjoint RNG streams.
RolloutGroup collect_group(const policy::PolicyParameters& theta, const env::Environment& env,
                           const registry::Registry& reg, const env::TaskInstance& task,
                           const TrainConfig& cfg, RngStream rng);

// A_i = (R_i - mean) / (pop_std + eps); all-equal groups give exactly zero.
AdvantageVector group_advantages(std::span<const double> rewards, double adv_epsilon);

// Per-trajectory clipped surrogate objective:
//   base = min(rho * A, clip(rho, 1-eps, 1+eps) * A)
//   objective = A >= 0 ? base : max(base, dual_clip * A)
double surrogate_objective(double ratio, double advantage, double clip_eps, double dual_clip);

// Negated mean objective over aligned old/new record lists (one trajectory).
// Masked records are excluded from the ratio; misaligned unmasked records
// raise MisalignedRecords.
double surrogate_loss(std::span<const policy::DecisionRecord> old_records,
                      std::span<const policy::DecisionRecord> new_records, double advantage,
                      double clip_eps, double dual_clip);

struct LossAndGrad {
    double loss = 0.0;
    policy::PolicyParameters grad;
};

// Group loss and analytic gradient at theta_new against rollouts collected
// under theta_old. Observation records contribute exactly nothing.
LossAndGrad masked_policy_loss(const RolloutGroup& group, const AdvantageVector& advantages,
                               const policy::PolicyParameters& theta_old,
                               const policy::PolicyParameters& theta_new, const TrainConfig& cfg);

struct UpdateStats {
    int step = 0;
    double mean_reward = 0.0;
    double mean_abs_advantage = 0.0;
    double format_violation_rate = 0.0;
    double loss = 0.0;
    std::array<double, policy::kPolicyHeads> head_entropy{};
};

// One on-policy update: sample tasks, collect groups, normalize advantages,
// apply a plain gradient-ascent step on the clipped objective.
policy::PolicyParameters train_step(const policy::PolicyParameters& theta,
                                    const env::Environment& env, const registry::Registry& reg,
                                    const TrainConfig& cfg, RngStream step_rng, UpdateStats& stats,
                                    std::vector<RolloutGroup>* collected = nullptr);

} // namespace maestro::trainer
