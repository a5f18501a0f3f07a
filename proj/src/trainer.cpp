#include "maestro/trainer.hpp"

#include <cmath>
#include <thread>

#include "maestro/errors.hpp"

namespace maestro::trainer {

void TrainConfig::validate() const {
    if (group_size < 2) throw Error(ErrorCode::ConfigError, "group_size must be at least 2");
    if (t_max < 1) throw Error(ErrorCode::ConfigError, "t_max must be at least 1");
    if (clip_eps <= 0.0) throw Error(ErrorCode::ConfigError, "clip_eps must be positive");
    if (dual_clip <= 1.0 + clip_eps) {
        throw Error(ErrorCode::ConfigError, "dual_clip must exceed 1 + clip_eps");
    }
    if (adv_epsilon <= 0.0) throw Error(ErrorCode::ConfigError, "adv_epsilon must be positive");
    if (temperature <= 0.0) throw Error(ErrorCode::ConfigError, "temperature must be positive");
    if (batch_size < 1) throw Error(ErrorCode::ConfigError, "batch_size must be at least 1");
    if (epochs_per_batch < 1) {
        throw Error(ErrorCode::ConfigError, "epochs_per_batch must be at least 1");
    }
    if (workers < 1) throw Error(ErrorCode::ConfigError, "workers must be at least 1");
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
    TrainConfig cfg;
    cfg.group_size = j.value("group_size", cfg.group_size);
    cfg.t_max = j.value("t_max", cfg.t_max);
    cfg.clip_eps = j.value("clip_eps", cfg.clip_eps);
    cfg.dual_clip = j.value("dual_clip", cfg.dual_clip);
    cfg.adv_epsilon = j.value("adv_epsilon", cfg.adv_epsilon);
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.steps = j.value("steps", cfg.steps);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.temperature = j.value("temperature", cfg.temperature);
    cfg.epochs_per_batch = j.value("epochs_per_batch", cfg.epochs_per_batch);
    cfg.workers = j.value("workers", cfg.workers);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.checkpoint_every = j.value("checkpoint_every", cfg.checkpoint_every);
    cfg.log_trajectories = j.value("log_trajectories", cfg.log_trajectories);
    cfg.disable_format_reward = j.value("disable_format_reward", cfg.disable_format_reward);
    cfg.validate();
    return cfg;
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
    return nlohmann::json{{"group_size", cfg.group_size},
                          {"t_max", cfg.t_max},
                          {"clip_eps", cfg.clip_eps},
                          {"dual_clip", cfg.dual_clip},
                          {"adv_epsilon", cfg.adv_epsilon},
                          {"learning_rate", cfg.learning_rate},
                          {"steps", cfg.steps},
                          {"batch_size", cfg.batch_size},
                          {"temperature", cfg.temperature},
                          {"epochs_per_batch", cfg.epochs_per_batch},
                          {"workers", cfg.workers},
                          {"seed", cfg.seed},
                          {"checkpoint_every", cfg.checkpoint_every},
                          {"log_trajectories", cfg.log_trajectories},
                          {"disable_format_reward", cfg.disable_format_reward}};
}

TrajectoryRecord run_episode(const policy::PolicyParameters& theta, const env::Environment& env,
                             const registry::Registry& reg,
                             std::shared_ptr<const policy::RegistryFeatures> reg_features,
                             const env::TaskInstance& task, const TrainConfig& cfg, RngStream rng,
                             bool greedy) {
    TrajectoryRecord record;
    env::EpisodeState state;
    state.task = task;

    int expert_calls = 0;
    for (state.turn = 0; state.turn < cfg.t_max; ++state.turn) {
        auto f = policy::featurize(state, reg_features, theta.layout);
        policy::PolicyAction action;
        std::vector<policy::DecisionRecord> decisions;
        if (greedy) {
            action = policy::greedy_action(theta, f, reg, state);
            decisions = policy::action_log_prob(theta, f, action, cfg.temperature);
            for (auto& d : decisions) d.turn = state.turn;
        } else {
            auto turn_rng = rng.child("turn").child(static_cast<std::uint64_t>(state.turn));
            std::tie(action, decisions) =
                policy::sample_action(theta, f, reg, state, cfg.temperature, turn_rng);
        }
        record.turn_features.push_back(f);
        for (auto& d : decisions) record.records.push_back(d);

        state.trace += protocol::wrap_think(action.think_text);
        if (action.type == policy::ActType::Search) {
            state.trace +=
                protocol::serialize_search(action.model_id, action.skill_id, action.query_text);
            const auto& model = reg.models[static_cast<std::size_t>(action.model_index)];
            const auto& skill = reg.skills[static_cast<std::size_t>(action.skill_index)];
            const auto& child = registry::route_level2(skill, action.query_text);
            auto expert_rng =
                rng.child("expert").child(static_cast<std::uint64_t>(state.turn));
            std::string obs = env::expert_call(env, state.task, model, skill, child,
                                               action.query_text, expert_calls, expert_rng);
            ++expert_calls;
            obs = protocol::truncate_observation(obs, env.gen.observation_token_limit);
            state.trace += protocol::wrap_observation(obs);
            state.latest_hint = obs;
            record.records.push_back(
                policy::DecisionRecord{policy::Head::Observation, 0, 0.0, true, state.turn});
        } else if (action.type == policy::ActType::Answer) {
            state.trace += protocol::wrap_answer(action.answer_text);
            break;
        }
        // Think: the reasoning block is already appended; the turn is spent.
    }

    record.raw = state.trace;
    record.parsed = protocol::parse_trajectory(record.raw);
    auto report = protocol::validate_format(record.parsed, reg);
    record.format_clean = report.violations.empty();
    record.reward = rewards::total_reward(record.parsed, task, report);
    if (cfg.disable_format_reward) {
        record.reward.r_fmt = 0;
        record.reward.total = record.reward.r_ans;
    }
    return record;
}

RolloutGroup collect_group(const policy::PolicyParameters& theta, const env::Environment& env,
                           const registry::Registry& reg, const env::TaskInstance& task,
                           const TrainConfig& cfg, RngStream rng) {
    cfg.validate();
    RolloutGroup group;
    group.task = task;
    group.trajectories.resize(static_cast<std::size_t>(cfg.group_size));
    auto reg_features = policy::registry_features(reg, theta.layout);

    auto run_range = [&](int begin, int end) {
        for (int i = begin; i < end; ++i) {
            auto episode_rng = rng.child("episode").child(static_cast<std::uint64_t>(i));
            group.trajectories[static_cast<std::size_t>(i)] =
                run_episode(theta, env, reg, reg_features, task, cfg, episode_rng);
        }
    };

    if (cfg.workers <= 1 || cfg.group_size <= 1) {
        run_range(0, cfg.group_size);
    } else {
        int n_threads = std::min(cfg.workers, cfg.group_size);
        std::vector<std::thread> threads;
        int chunk = (cfg.group_size + n_threads - 1) / n_threads;
        for (int t = 0; t < n_threads; ++t) {
            int begin = t * chunk;
            int end = std::min(cfg.group_size, begin + chunk);
            if (begin >= end) break;
            threads.emplace_back(run_range, begin, end);
        }
        for (auto& th : threads) th.join();
    }
    return group;
}

AdvantageVector group_advantages(std::span<const double> rewards, double adv_epsilon) {
    if (rewards.size() < 2) {
        throw Error(ErrorCode::ConfigError, "group advantages need at least two rewards");
    }
    if (adv_epsilon <= 0.0) {
        throw Error(ErrorCode::ConfigError, "adv_epsilon must be positive");
    }
    AdvantageVector out;
    out.epsilon = adv_epsilon;
    double mean = 0.0;
    for (double r : rewards) mean += r;
    mean /= static_cast<double>(rewards.size());
    double var = 0.0;
    for (double r : rewards) var += (r - mean) * (r - mean);
    var /= static_cast<double>(rewards.size());
    out.mean_reward = mean;
    out.std_reward = std::sqrt(var);
    out.a.reserve(rewards.size());
    for (double r : rewards) out.a.push_back((r - mean) / (out.std_reward + adv_epsilon));
    return out;
}

double surrogate_objective(double ratio, double advantage, double clip_eps, double dual_clip) {
    double clipped = std::clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps);
    double base = std::min(ratio * advantage, clipped * advantage);
    if (advantage < 0.0) base = std::max(base, dual_clip * advantage);
    return base;
}

namespace {

double log_ratio_sum(std::span<const policy::DecisionRecord> old_records,
                     std::span<const policy::DecisionRecord> new_records) {
    std::size_t i = 0, j = 0;
    double sum = 0.0;
    while (true) {
        while (i < old_records.size() && old_records[i].masked) ++i;
        while (j < new_records.size() && new_records[j].masked) ++j;
        if (i == old_records.size() || j == new_records.size()) break;
        if (old_records[i].head != new_records[j].head ||
            old_records[i].chosen != new_records[j].chosen) {
            throw Error(ErrorCode::MisalignedRecords,
                        "old/new decision records disagree on the unmasked sequence");
        }
        sum += new_records[j].log_prob - old_records[i].log_prob;
        ++i;
        ++j;
    }
    while (i < old_records.size() && old_records[i].masked) ++i;
    while (j < new_records.size() && new_records[j].masked) ++j;
    if (i != old_records.size() || j != new_records.size()) {
        throw Error(ErrorCode::MisalignedRecords,
                    "old/new decision records differ in unmasked length");
    }
    return sum;
}

} // namespace

double surrogate_loss(std::span<const policy::DecisionRecord> old_records,
                      std::span<const policy::DecisionRecord> new_records, double advantage,
                      double clip_eps, double dual_clip) {
    double rho = std::exp(log_ratio_sum(old_records, new_records));
    return -surrogate_objective(rho, advantage, clip_eps, dual_clip);
}

LossAndGrad masked_policy_loss(const RolloutGroup& group, const AdvantageVector& advantages,
                               const policy::PolicyParameters& theta_old,
                               const policy::PolicyParameters& theta_new, const TrainConfig& cfg) {
    if (advantages.a.size() != group.trajectories.size()) {
        throw Error(ErrorCode::MisalignedRecords, "advantage count does not match the group size");
    }
    LossAndGrad out;
    out.grad = policy::PolicyParameters::zeros(theta_new.layout, theta_new.base_registry_version);
    const double g = static_cast<double>(group.trajectories.size());
    (void)theta_old; // old log-probs were frozen into the records at collection

    for (std::size_t i = 0; i < group.trajectories.size(); ++i) {
        const auto& traj = group.trajectories[i];
        const double advantage = advantages.a[i];

        // Recompute log-probs under theta_new; masked records contribute zero.
        double log_ratio = 0.0;
        std::vector<const policy::DecisionRecord*> unmasked;
        for (const auto& rec : traj.records) {
            if (rec.masked) continue;
            const auto& f = traj.turn_features[static_cast<std::size_t>(rec.turn)];
            double lp =
                policy::head_log_prob(theta_new, f, rec.head, rec.chosen, cfg.temperature);
            log_ratio += lp - rec.log_prob;
            unmasked.push_back(&rec);
        }
        double rho = std::exp(log_ratio);
        out.loss += -surrogate_objective(rho, advantage, cfg.clip_eps, cfg.dual_clip) / g;

        // d objective / d theta is nonzero only while the unclipped branch is
        // active; in the clipped or dual-clipped region the objective is
        // locally constant in theta.
        double clipped = std::clamp(rho, 1.0 - cfg.clip_eps, 1.0 + cfg.clip_eps);
        double base = std::min(rho * advantage, clipped * advantage);
        bool unclipped_active = rho * advantage <= clipped * advantage;
        if (advantage < 0.0 && cfg.dual_clip * advantage > base) {
            unclipped_active = false; // dual-clip floor took over
        }
        if (!unclipped_active || advantage == 0.0) continue;

        double coeff = -(advantage * rho) / g; // d loss / d log pi
        for (const auto* rec : unmasked) {
            const auto& f = traj.turn_features[static_cast<std::size_t>(rec->turn)];
            policy::accumulate_log_prob_grad(theta_new, f, *rec, coeff, cfg.temperature, out.grad);
        }
    }
    return out;
}

policy::PolicyParameters train_step(const policy::PolicyParameters& theta,
                                    const env::Environment& env, const registry::Registry& reg,
                                    const TrainConfig& cfg, RngStream step_rng, UpdateStats& stats,
                                    std::vector<RolloutGroup>* collected) {
    cfg.validate();

    std::vector<RolloutGroup> groups;
    groups.reserve(static_cast<std::size_t>(cfg.batch_size));
    for (int b = 0; b < cfg.batch_size; ++b) {
        auto task_rng = step_rng.child("task").child(static_cast<std::uint64_t>(b));
        auto task = env::sample_task(env.gen, task_rng);
        auto group_rng = step_rng.child("group").child(static_cast<std::uint64_t>(b));
        groups.push_back(collect_group(theta, env, reg, task, cfg, group_rng));
    }

    // Stats are measured at the collection policy.
    double reward_sum = 0.0, abs_adv_sum = 0.0, violation_sum = 0.0;
    std::size_t n_traj = 0;
    std::array<double, policy::kPolicyHeads> entropy_sum{};
    std::size_t entropy_states = 0;

    std::vector<AdvantageVector> advantages;
    advantages.reserve(groups.size());
    for (const auto& group : groups) {
        std::vector<double> rewards;
        rewards.reserve(group.trajectories.size());
        for (const auto& traj : group.trajectories) {
            rewards.push_back(static_cast<double>(traj.reward.total));
            reward_sum += traj.reward.total;
            violation_sum += traj.format_clean ? 0.0 : 1.0;
            ++n_traj;
        }
        advantages.push_back(group_advantages(rewards, cfg.adv_epsilon));
        for (double a : advantages.back().a) abs_adv_sum += std::abs(a);

        for (const auto& traj : group.trajectories) {
            for (const auto& f : traj.turn_features) {
                for (int h = 0; h < policy::kPolicyHeads; ++h) {
                    entropy_sum[static_cast<std::size_t>(h)] += policy::head_entropy(
                        theta, f, static_cast<policy::Head>(h), cfg.temperature);
                }
                ++entropy_states;
            }
        }
    }

    policy::PolicyParameters current = theta;
    double last_loss = 0.0;
    for (int epoch = 0; epoch < cfg.epochs_per_batch; ++epoch) {
        auto grad_total = policy::PolicyParameters::zeros(theta.layout, theta.base_registry_version);
        double loss_total = 0.0;
        for (std::size_t g = 0; g < groups.size(); ++g) {
            auto lg = masked_policy_loss(groups[g], advantages[g], theta, current, cfg);
            loss_total += lg.loss;
            grad_total.add_scaled(lg.grad, 1.0);
        }
        double scale = 1.0 / static_cast<double>(groups.size());
        loss_total *= scale;
        // Gradient descent on the loss == ascent on the clipped objective.
        current.add_scaled(grad_total, -cfg.learning_rate * scale);
        last_loss = loss_total;
    }

    stats.mean_reward = n_traj ? reward_sum / static_cast<double>(n_traj) : 0.0;
    stats.mean_abs_advantage = n_traj ? abs_adv_sum / static_cast<double>(n_traj) : 0.0;
    stats.format_violation_rate = n_traj ? violation_sum / static_cast<double>(n_traj) : 0.0;
    stats.loss = last_loss;
    for (int h = 0; h < policy::kPolicyHeads; ++h) {
        stats.head_entropy[static_cast<std::size_t>(h)] =
            entropy_states ? entropy_sum[static_cast<std::size_t>(h)] /
                                 static_cast<double>(entropy_states)
                           : 0.0;
    }
    if (collected) *collected = std::move(groups);
    return current;
}

} // namespace maestro::trainer
