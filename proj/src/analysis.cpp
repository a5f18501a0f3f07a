#include "maestro/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>

#include "maestro/errors.hpp"

namespace maestro::analysis {

CompatibilityReport compatibility(double u0, double uM, double uK, double uMK) {
    if (!std::isfinite(u0) || !std::isfinite(uM) || !std::isfinite(uK) || !std::isfinite(uMK)) {
        throw Error(ErrorCode::ConfigError, "compatibility inputs must be finite");
    }
    CompatibilityReport r;
    r.u0 = u0;
    r.uM = uM;
    r.uK = uK;
    r.uMK = uMK;
    r.delta_m = uM - u0;
    r.delta_k = uK - u0;
    r.compat = uMK - uM - uK + u0;
    return r;
}

OracleResult oracle_utility(const env::UtilityTable& table, const std::string& type,
                            const registry::Registry& reg) {
    OracleResult best;
    bool first = true;
    for (const auto& m : reg.models) {
        for (const auto& s : reg.skills) {
            double value = table.at(type, m.id, s.id);
            if (first || value > best.value) {
                best = OracleResult{value, m.id, s.id};
                first = false;
            }
        }
    }
    if (first) throw Error(ErrorCode::EmptyPool, "oracle over an empty registry");
    return best;
}

double oracle_expected_utility(const env::UtilityTable& table, const env::GenConfig& gen,
                               const registry::Registry& reg) {
    double total_weight = 0.0;
    double acc = 0.0;
    for (const auto& t : gen.task_types) {
        acc += t.weight * oracle_utility(table, t.label, reg).value;
        total_weight += t.weight;
    }
    return acc / total_weight;
}

EvalResult evaluate_policy(const policy::PolicyParameters& theta, const env::Environment& env,
                           const registry::Registry& reg, const trainer::TrainConfig& cfg,
                           int episodes, RngStream rng, EvalMode mode) {
    if (episodes < 1) throw Error(ErrorCode::ConfigError, "evaluation needs at least one episode");
    EvalResult out;
    out.episodes = episodes;
    auto reg_features = policy::registry_features(reg, theta.layout);

    // Oracle pair per type, for routing accuracy.
    std::map<std::string, std::pair<std::string, std::string>> oracle_pairs;
    for (const auto& t : env.gen.task_types) {
        auto o = oracle_utility(env.table, t.label, reg);
        oracle_pairs[t.label] = {o.model_id, o.skill_id};
    }

    auto started = std::chrono::steady_clock::now();
    for (int e = 0; e < episodes; ++e) {
        auto task_rng = rng.child("task").child(static_cast<std::uint64_t>(e));
        auto task = env::sample_task(env.gen, task_rng);
        auto episode_rng = rng.child("episode").child(static_cast<std::uint64_t>(e));
        auto traj = trainer::run_episode(theta, env, reg, reg_features, task, cfg, episode_rng,
                                         mode == EvalMode::Greedy);
        out.mean_reward += traj.reward.total;
        out.accuracy += traj.reward.r_ans;
        out.format_violation_rate +=
            protocol::validate_format(traj.parsed, reg).clean() ? 0.0 : 1.0;

        const auto& [oracle_model, oracle_skill] = oracle_pairs.at(task.task_type);
        for (const auto& step : traj.parsed.steps) {
            if (!step.is_search()) continue;
            const auto& search = std::get<protocol::SearchAction>(*step.action);
            if (search.model_id == oracle_model && search.skill_id == oracle_skill) {
                out.routing_accuracy += 1.0;
            }
            break; // first search decides the routing
        }
    }
    auto elapsed = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                             started)
                       .count();
    out.mean_reward /= episodes;
    out.accuracy /= episodes;
    out.routing_accuracy /= episodes;
    out.format_violation_rate /= episodes;
    out.mean_episode_wall_ms = elapsed / episodes;
    return out;
}

RegretReport routing_regret(const policy::PolicyParameters& theta, const env::UtilityTable& table,
                            const env::Environment& env, const registry::Registry& reg,
                            const trainer::TrainConfig& cfg, int episodes, RngStream rng,
                            EvalMode mode, std::vector<PerTypeRegret>* per_type) {
    if (episodes < 1) throw Error(ErrorCode::ConfigError, "routing_regret needs episodes >= 1");
    RegretReport report;
    report.oracle = oracle_expected_utility(table, env.gen, reg);

    env::Environment scoped = env;
    scoped.table = table;
    auto result = evaluate_policy(theta, scoped, reg, cfg, episodes, rng.child("aggregate"), mode);
    report.achieved = result.mean_reward;
    report.regret = report.oracle - report.achieved;

    if (per_type) {
        per_type->clear();
        for (const auto& t : env.gen.task_types) {
            env::Environment focused = scoped;
            focused.gen.task_types = {t};
            RegretReport r;
            r.oracle = oracle_utility(table, t.label, reg).value;
            auto res = evaluate_policy(theta, focused, reg, cfg,
                                       std::max(1, episodes / static_cast<int>(
                                                        env.gen.task_types.size())),
                                       rng.child(t.label), mode);
            r.achieved = res.mean_reward;
            r.regret = r.oracle - r.achieved;
            per_type->push_back(PerTypeRegret{t.label, r});
        }
    }
    return report;
}

bool registry_extends(const registry::Registry& before, const registry::Registry& after) {
    for (const auto& m : before.models) {
        if (!after.find_model(m.id)) return false;
    }
    for (const auto& s : before.skills) {
        if (!after.find_skill(s.id)) return false;
    }
    return true;
}

ExpansionReport expansion_check(const env::UtilityTable& table,
                                const registry::Registry& reg_before,
                                const registry::Registry& reg_after,
                                const policy::PolicyParameters& theta, const env::Environment& env,
                                const trainer::TrainConfig& cfg, int episodes, RngStream rng) {
    if (!registry_extends(reg_before, reg_after)) {
        throw Error(ErrorCode::NotAnExtension,
                    "the second registry does not contain the first");
    }
    ExpansionReport report;
    report.oracle_before = oracle_expected_utility(table, env.gen, reg_before);
    report.oracle_after = oracle_expected_utility(table, env.gen, reg_after);
    report.oracle_gain = report.oracle_after - report.oracle_before;
    report.oracle_monotonic = report.oracle_after >= report.oracle_before;

    env::Environment scoped = env;
    scoped.table = table;

    // The practical gain and the regret terms use independent Monte Carlo
    // streams, so the decomposition residual reflects pure sampling noise.
    auto before_a =
        evaluate_policy(theta, scoped, reg_before, cfg, episodes, rng.child("before_a"),
                        EvalMode::Sample);
    auto after_a = evaluate_policy(theta, scoped, reg_after, cfg, episodes, rng.child("after_a"),
                                   EvalMode::Sample);
    auto before_b =
        evaluate_policy(theta, scoped, reg_before, cfg, episodes, rng.child("before_b"),
                        EvalMode::Sample);
    auto after_b = evaluate_policy(theta, scoped, reg_after, cfg, episodes, rng.child("after_b"),
                                   EvalMode::Sample);

    report.achieved_before = before_a.mean_reward;
    report.achieved_after = after_a.mean_reward;
    report.practical_gain = report.achieved_after - report.achieved_before;
    report.regret_before = report.oracle_before - before_b.mean_reward;
    report.regret_after = report.oracle_after - after_b.mean_reward;

    double rhs = report.oracle_gain - (report.regret_after - report.regret_before);
    report.decomposition_residual = report.practical_gain - rhs;
    // Four independent +/-1-bounded estimates; conservative per-estimate std.
    report.mc_std_error = 4.0 * (0.5 / std::sqrt(static_cast<double>(episodes)));
    return report;
}

double pass_at_k(const std::vector<std::vector<bool>>& per_task_samples) {
    if (per_task_samples.empty()) {
        throw Error(ErrorCode::RaggedInput, "pass@k needs at least one task");
    }
    std::size_t k = per_task_samples.front().size();
    if (k < 1) throw Error(ErrorCode::RaggedInput, "pass@k needs at least one sample per task");
    double hits = 0.0;
    for (const auto& samples : per_task_samples) {
        if (samples.size() != k) {
            throw Error(ErrorCode::RaggedInput, "pass@k sample lists must share one k");
        }
        for (bool b : samples) {
            if (b) {
                hits += 1.0;
                break;
            }
        }
    }
    return hits / static_cast<double>(per_task_samples.size());
}

double sc_at_k(const std::vector<std::vector<std::string>>& per_task_answers,
               std::span<const std::string> gold) {
    if (per_task_answers.empty()) {
        throw Error(ErrorCode::RaggedInput, "sc@k needs at least one task");
    }
    if (per_task_answers.size() != gold.size()) {
        throw Error(ErrorCode::RaggedInput, "sc@k needs one gold answer per task");
    }
    std::size_t k = per_task_answers.front().size();
    if (k < 1) throw Error(ErrorCode::RaggedInput, "sc@k needs at least one answer per task");
    double hits = 0.0;
    for (std::size_t t = 0; t < per_task_answers.size(); ++t) {
        const auto& answers = per_task_answers[t];
        if (answers.size() != k) {
            throw Error(ErrorCode::RaggedInput, "sc@k answer lists must share one k");
        }
        std::map<std::string, std::pair<std::size_t, std::size_t>> counts; // count, first index
        for (std::size_t i = 0; i < answers.size(); ++i) {
            auto [it, inserted] = counts.try_emplace(answers[i], 0, i);
            it->second.first += 1;
        }
        const std::string* plurality = nullptr;
        std::size_t best_count = 0, best_first = 0;
        for (const auto& [answer, stat] : counts) {
            auto [count, first] = stat;
            if (count > best_count || (count == best_count && first < best_first)) {
                best_count = count;
                best_first = first;
                plurality = &answer;
            }
        }
        if (plurality && *plurality == gold[t]) hits += 1.0;
    }
    return hits / static_cast<double>(per_task_answers.size());
}

std::vector<ScalingRow> skill_scaling_experiment(std::span<const registry::Registry> registries,
                                                 const env::GenConfig& gen,
                                                 const trainer::TrainConfig& cfg,
                                                 int eval_episodes, RngStream rng,
                                                 const TrainFn& train_fn) {
    if (registries.empty()) {
        throw Error(ErrorCode::ConfigError, "scaling experiment needs at least one registry");
    }
    for (std::size_t i = 1; i < registries.size(); ++i) {
        if (!registry_extends(registries[i - 1], registries[i])) {
            throw Error(ErrorCode::NotNested, "scaling registries must be ordered by inclusion");
        }
    }
    if (!train_fn) {
        throw Error(ErrorCode::ConfigError, "scaling experiment needs a train function");
    }
    // One ground truth, planted on the full registry: smaller pools simply
    // cannot reach every optimum, which is what the experiment measures.
    auto full_env = env::Environment::synthetic(gen, registries.back());
    std::vector<ScalingRow> rows;
    for (std::size_t i = 0; i < registries.size(); ++i) {
        const auto& reg = registries[i];
        env::Environment env = full_env;
        auto theta = train_fn(reg, env, cfg);
        auto result = evaluate_policy(theta, env, reg, cfg, eval_episodes,
                                      rng.child("eval").child(static_cast<std::uint64_t>(i)),
                                      EvalMode::Greedy);
        ScalingRow row;
        row.n_level1 = static_cast<int>(reg.skills.size());
        row.n_level2 = static_cast<int>(reg.total_level2());
        row.n_models = static_cast<int>(reg.models.size());
        row.accuracy = result.accuracy;
        row.mean_episode_wall_ms = result.mean_episode_wall_ms;
        rows.push_back(row);
    }
    return rows;
}

} // namespace maestro::analysis
