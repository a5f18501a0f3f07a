#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "maestro/environment.hpp"
#include "maestro/policy.hpp"
#include "maestro/registry.hpp"
#include "maestro/trainer.hpp"

namespace maestro::analysis {

// --- Compatibility decomposition -------------------------------------------

struct CompatibilityReport {
    double u0, uM, uK, uMK;
    double delta_m; // uM - u0
    double delta_k; // uK - u0
    double compat;  // uMK - uM - uK + u0
};

CompatibilityReport compatibility(double u0, double uM, double uK, double uMK);

// --- Oracle utility and routing regret --------------------------------------

struct OracleResult {
    double value = 0.0;
    std::string model_id;
    std::string skill_id;
};

// Max over the registry with deterministic tie-break (model order, then skill
// order).
OracleResult oracle_utility(const env::UtilityTable& table, const std::string& type,
                            const registry::Registry& reg);

// Closed-form expectation of the always-argmax one-search policy over the
// task-type mixture.
double oracle_expected_utility(const env::UtilityTable& table, const env::GenConfig& gen,
                               const registry::Registry& reg);

enum class EvalMode { Sample, Greedy };

struct EvalResult {
    double mean_reward = 0.0;       // mean R(tau)
    double accuracy = 0.0;          // mean r_ans
    double routing_accuracy = 0.0;  // first search action hits the oracle pair
    double format_violation_rate = 0.0;
    double mean_episode_wall_ms = 0.0;
    int episodes = 0;
};

EvalResult evaluate_policy(const policy::PolicyParameters& theta, const env::Environment& env,
                           const registry::Registry& reg, const trainer::TrainConfig& cfg,
                           int episodes, RngStream rng, EvalMode mode);

struct RegretReport {
    double oracle = 0.0;
    double achieved = 0.0;
    double regret = 0.0;
};

struct PerTypeRegret {
    std::string type;
    RegretReport report;
};

// achieved = Monte Carlo mean episode reward of pi_theta (stochastic policy by
// default; greedy via mode); oracle = closed-form expectation from the table.
RegretReport routing_regret(const policy::PolicyParameters& theta, const env::UtilityTable& table,
                            const env::Environment& env, const registry::Registry& reg,
                            const trainer::TrainConfig& cfg, int episodes, RngStream rng,
                            EvalMode mode = EvalMode::Sample,
                            std::vector<PerTypeRegret>* per_type = nullptr);

// --- Registry-expansion diagnostics -----------------------------------------

struct ExpansionReport {
    double oracle_before = 0.0;
    double oracle_after = 0.0;
    double oracle_gain = 0.0;
    double achieved_before = 0.0;
    double achieved_after = 0.0;
    double practical_gain = 0.0;
    double regret_before = 0.0;
    double regret_after = 0.0;
    // practical gain minus (oracle gain - regret increase); zero in
    // expectation, pure Monte Carlo noise in estimates.
    double decomposition_residual = 0.0;
    double mc_std_error = 0.0;
    bool oracle_monotonic = false;
};

// Verifies U*(M',K') >= U*(M,K) in closed form and reports the gain
// decomposition with independently estimated sides.
ExpansionReport expansion_check(const env::UtilityTable& table,
                                const registry::Registry& reg_before,
                                const registry::Registry& reg_after,
                                const policy::PolicyParameters& theta, const env::Environment& env,
                                const trainer::TrainConfig& cfg, int episodes, RngStream rng);

// --- Test-time scaling metrics ----------------------------------------------

// Fraction of tasks with at least one correct sample. All tasks must supply
// the same k >= 1 samples.
double pass_at_k(const std::vector<std::vector<bool>>& per_task_samples);

// Plurality vote per task (ties broken by the earliest-sampled answer among
// the tied ones) compared against gold.
double sc_at_k(const std::vector<std::vector<std::string>>& per_task_answers,
               std::span<const std::string> gold);

// --- Skill-pool scaling ------------------------------------------------------

struct ScalingRow {
    int n_level1 = 0;
    int n_level2 = 0;
    int n_models = 0;
    double accuracy = 0.0;
    double mean_episode_wall_ms = 0.0;
};

using TrainFn = std::function<policy::PolicyParameters(
    const registry::Registry& reg, const env::Environment& env, const trainer::TrainConfig& cfg)>;

// Trains (or evaluates, when train_fn is null and theta is given) one row per
// registry. Registries must be ordered by inclusion.
std::vector<ScalingRow> skill_scaling_experiment(std::span<const registry::Registry> registries,
                                                 const env::GenConfig& gen,
                                                 const trainer::TrainConfig& cfg,
                                                 int eval_episodes, RngStream rng,
                                                 const TrainFn& train_fn);

// Inclusion check shared by expansion_check and the scaling experiment.
bool registry_extends(const registry::Registry& before, const registry::Registry& after);

} // namespace maestro::analysis
