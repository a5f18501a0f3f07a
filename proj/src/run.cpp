#include "maestro/run.hpp"

#include <chrono>
#include <fstream>
#include <iostream>

#include "maestro/analysis.hpp"
#include "maestro/config.hpp"
#include "maestro/errors.hpp"
#include "maestro/logio.hpp"
#include "maestro/policy.hpp"
#include "maestro/registry.hpp"
#include "maestro/trainer.hpp"

namespace maestro::run {

namespace {

int report_failure(const std::exception& e) {
    nlohmann::json record{{"error", {{"code", "Internal"}, {"message", e.what()}}}};
    int status = 2;
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        record["error"]["code"] = std::string(error_code_name(err->code()));
        status = err->is_user_error() ? 1 : 2;
    }
    std::cerr << record.dump() << "\n";
    return status;
}

template <typename Fn>
int guarded(Fn&& fn) {
    try {
        return fn();
    } catch (const std::exception& e) {
        return report_failure(e);
    }
}

struct Experiment {
    config::ExperimentConfig cfg;
    registry::Registry reg;
    env::Environment environment;
    policy::FeatureLayout layout;
};

Experiment open_experiment(const std::filesystem::path& config_path,
                           const std::vector<std::string>& overrides) {
    Experiment ex;
    ex.cfg = config::load_experiment(config_path, overrides);
    ex.reg = registry::load_registry_file(ex.cfg.registry_path);
    ex.environment = env::Environment::synthetic(ex.cfg.gen, ex.reg);
    ex.layout.tag_dim = ex.cfg.gen.tag_dim;
    ex.layout.task_dim = ex.cfg.gen.tag_dim;
    ex.layout.t_max = ex.cfg.train.t_max;
    return ex;
}

policy::PolicyParameters load_or_init(const Experiment& ex,
                                      const std::optional<std::filesystem::path>& checkpoint) {
    if (checkpoint) {
        auto theta = policy::load_checkpoint(*checkpoint);
        if (!(theta.layout == ex.layout)) {
            throw Error(ErrorCode::VersionMismatch,
                        "checkpoint feature layout does not match the experiment config");
        }
        return theta;
    }
    return policy::PolicyParameters::zeros(ex.layout, ex.reg.version);
}

nlohmann::json trajectory_record(int step, int group_index,
                                 const trainer::RolloutGroup& group,
                                 const trainer::TrajectoryRecord& traj) {
    nlohmann::json decisions = nlohmann::json::array();
    for (const auto& d : traj.records) {
        decisions.push_back({{"head", std::string(policy::head_name(d.head))},
                             {"chosen", d.chosen},
                             {"log_prob", d.log_prob},
                             {"masked", d.masked},
                             {"turn", d.turn}});
    }
    auto now = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
    return nlohmann::json{{"step", step},
                          {"task_id", group.task.task_id},
                          {"task_type", group.task.task_type},
                          {"group_index", group_index},
                          {"trajectory", traj.raw},
                          {"r_ans", traj.reward.r_ans},
                          {"r_fmt", traj.reward.r_fmt},
                          {"total", traj.reward.total},
                          {"decisions", decisions},
                          {"logged_unix_ms", now}};
}

std::vector<std::string> metrics_columns() {
    return {"step",
            "mean_reward",
            "mean_abs_advantage",
            "format_violation_rate",
            "loss",
            "entropy_act_type",
            "entropy_model",
            "entropy_skill",
            "entropy_query_template",
            "entropy_answer_mode"};
}

} // namespace

int cmd_train(const std::filesystem::path& config_path,
              const std::vector<std::string>& overrides) {
    return guarded([&]() {
        auto ex = open_experiment(config_path, overrides);
        std::filesystem::create_directories(ex.cfg.output_dir);

        auto theta = policy::PolicyParameters::zeros(ex.layout, ex.reg.version);
        RngStream root(ex.cfg.seed);

        logio::CsvWriter metrics(ex.cfg.output_dir / "metrics.csv", metrics_columns());
        std::optional<logio::JsonlWriter> trajectories;
        if (ex.cfg.train.log_trajectories) {
            trajectories.emplace(ex.cfg.output_dir / "trajectories.jsonl");
        }

        for (int step = 0; step < ex.cfg.train.steps; ++step) {
            trainer::UpdateStats stats;
            stats.step = step;
            std::vector<trainer::RolloutGroup> collected;
            auto step_rng = root.child("train").child(static_cast<std::uint64_t>(step));
            theta = trainer::train_step(theta, ex.environment, ex.reg, ex.cfg.train, step_rng,
                                        stats, trajectories ? &collected : nullptr);

            metrics.write_row({logio::CsvWriter::format_int(step),
                               logio::CsvWriter::format_double(stats.mean_reward),
                               logio::CsvWriter::format_double(stats.mean_abs_advantage),
                               logio::CsvWriter::format_double(stats.format_violation_rate),
                               logio::CsvWriter::format_double(stats.loss),
                               logio::CsvWriter::format_double(stats.head_entropy[0]),
                               logio::CsvWriter::format_double(stats.head_entropy[1]),
                               logio::CsvWriter::format_double(stats.head_entropy[2]),
                               logio::CsvWriter::format_double(stats.head_entropy[3]),
                               logio::CsvWriter::format_double(stats.head_entropy[4])});

            if (trajectories) {
                for (const auto& group : collected) {
                    for (std::size_t g = 0; g < group.trajectories.size(); ++g) {
                        trajectories->write(trajectory_record(step, static_cast<int>(g), group,
                                                              group.trajectories[g]));
                    }
                }
            }
            if (ex.cfg.train.checkpoint_every > 0 &&
                (step + 1) % ex.cfg.train.checkpoint_every == 0) {
                policy::save_checkpoint(theta, ex.cfg.output_dir /
                                                   ("checkpoint_" + std::to_string(step + 1) +
                                                    ".json"));
            }
        }
        policy::save_checkpoint(theta, ex.cfg.output_dir / "checkpoint_final.json");
        std::cout << "trained " << ex.cfg.train.steps << " steps; outputs in "
                  << ex.cfg.output_dir.string() << "\n";
        return 0;
    });
}

int cmd_eval(const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
             const std::filesystem::path& checkpoint, const std::string& mode, int k) {
    return guarded([&]() {
        auto ex = open_experiment(config_path, overrides);
        std::filesystem::create_directories(ex.cfg.output_dir);
        auto theta = load_or_init(ex, checkpoint);
        RngStream root(ex.cfg.seed);
        auto eval_rng = root.child("eval");

        trainer::TrainConfig rollout_cfg = ex.cfg.train;
        rollout_cfg.temperature = ex.cfg.eval.temperature;
        int episodes = ex.cfg.eval.episodes;
        if (k <= 0) k = ex.cfg.eval.k;

        logio::CsvWriter csv(ex.cfg.output_dir / ("eval_" + mode + ".csv"),
                             {"mode", "episodes", "k", "value", "accuracy", "mean_reward",
                              "routing_accuracy"});

        if (mode == "greedy") {
            auto result = analysis::evaluate_policy(theta, ex.environment, ex.reg, rollout_cfg,
                                                    episodes, eval_rng,
                                                    analysis::EvalMode::Greedy);
            csv.write_row({"greedy", logio::CsvWriter::format_int(episodes), "1",
                           logio::CsvWriter::format_double(result.accuracy),
                           logio::CsvWriter::format_double(result.accuracy),
                           logio::CsvWriter::format_double(result.mean_reward),
                           logio::CsvWriter::format_double(result.routing_accuracy)});
            std::cout << "greedy accuracy " << result.accuracy << ", routing accuracy "
                      << result.routing_accuracy << " over " << episodes << " episodes\n";
            return 0;
        }

        if (mode != "pass_at_k" && mode != "sc_at_k") {
            throw Error(ErrorCode::ConfigError,
                        "eval mode must be greedy, pass_at_k or sc_at_k, got " + mode);
        }

        auto reg_features = policy::registry_features(ex.reg, theta.layout);
        std::vector<std::vector<bool>> correward;
        std::vector<std::vector<std::string>> answers;
        std::vector<std::string> golds;
        double accuracy_sum = 0.0;
        std::size_t samples = 0;
        for (int t = 0; t < episodes; ++t) {
            auto task_rng = eval_rng.child("task").child(static_cast<std::uint64_t>(t));
            auto task = env::sample_task(ex.cfg.gen, task_rng);
            std::vector<bool> task_correct;
            std::vector<std::string> task_answers;
            for (int s = 0; s < k; ++s) {
                auto episode_rng = eval_rng.child("episode")
                                       .child(static_cast<std::uint64_t>(t))
                                       .child(static_cast<std::uint64_t>(s));
                auto traj = trainer::run_episode(theta, ex.environment, ex.reg, reg_features, task,
                                                 rollout_cfg, episode_rng);
                task_correct.push_back(traj.reward.r_ans > 0);
                task_answers.push_back(traj.parsed.final_answer().value_or(""));
                accuracy_sum += traj.reward.r_ans;
                ++samples;
            }
            correward.push_back(std::move(task_correct));
            answers.push_back(std::move(task_answers));
            golds.push_back(task.gold_answer);
        }
        double sampled_accuracy = samples ? accuracy_sum / static_cast<double>(samples) : 0.0;
        double value = mode == "pass_at_k" ? analysis::pass_at_k(correward)
                                           : analysis::sc_at_k(answers, golds);
        csv.write_row({mode, logio::CsvWriter::format_int(episodes),
                       logio::CsvWriter::format_int(k), logio::CsvWriter::format_double(value),
                       logio::CsvWriter::format_double(sampled_accuracy), "", ""});
        std::cout << mode << " = " << value << " (k=" << k << ", sampled accuracy "
                  << sampled_accuracy << ") over " << episodes << " tasks\n";
        return 0;
    });
}

int cmd_rollout(const std::filesystem::path& config_path,
                const std::vector<std::string>& overrides,
                const std::optional<std::filesystem::path>& checkpoint, int episodes,
                const std::filesystem::path& out_path) {
    return guarded([&]() {
        auto ex = open_experiment(config_path, overrides);
        if (episodes < 1) throw Error(ErrorCode::ConfigError, "rollout needs episodes >= 1");
        auto theta = load_or_init(ex, checkpoint);
        auto reg_features = policy::registry_features(ex.reg, theta.layout);
        RngStream root(ex.cfg.seed);
        auto rng = root.child("rollout");

        std::filesystem::create_directories(out_path.parent_path().empty()
                                                ? std::filesystem::path(".")
                                                : out_path.parent_path());
        logio::JsonlWriter out(out_path);
        for (int e = 0; e < episodes; ++e) {
            auto task = env::sample_task(ex.cfg.gen,
                                         rng.child("task").child(static_cast<std::uint64_t>(e)));
            auto traj = trainer::run_episode(theta, ex.environment, ex.reg, reg_features, task,
                                             ex.cfg.train,
                                             rng.child("episode").child(
                                                 static_cast<std::uint64_t>(e)));
            trainer::RolloutGroup shim;
            shim.task = task;
            out.write(trajectory_record(0, e, shim, traj));
        }
        std::cout << "wrote " << episodes << " episodes to " << out_path.string() << "\n";
        return 0;
    });
}

int cmd_registry_validate(const std::filesystem::path& registry_path) {
    return guarded([&]() {
        std::ifstream in(registry_path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + registry_path.string());
        nlohmann::json j;
        try {
            in >> j;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::SchemaError, "not valid JSON: " + std::string(e.what()));
        }
        registry::validate_registry_json(j);
        std::cout << "OK " << registry_path.string() << "\n";
        return 0;
    });
}

int cmd_registry_stats(const std::filesystem::path& registry_path) {
    return guarded([&]() {
        auto reg = registry::load_registry_file(registry_path);
        auto stats = registry::compression_stats(reg);
        std::cout << "models " << reg.models.size() << ", level-1 skills " << reg.skills.size()
                  << ", level-2 skills " << reg.total_level2() << "\n";
        std::cout << "flat action space " << stats.flat_size << ", hierarchical "
                  << stats.hier_size << ", compression ratio " << stats.ratio_num << "/"
                  << stats.ratio_den << "\n";
        return 0;
    });
}

int cmd_registry_extend(const std::filesystem::path& base_path,
                        const std::filesystem::path& pack_path,
                        const std::filesystem::path& out_path) {
    return guarded([&]() {
        auto base = registry::load_registry_file(base_path);

        std::ifstream in(pack_path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + pack_path.string());
        nlohmann::json pack;
        try {
            in >> pack;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::SchemaError, "not valid JSON: " + std::string(e.what()));
        }
        // A pack reuses the registry schema with both arrays optional.
        nlohmann::json shim{{"models", nlohmann::json::array()},
                            {"skills", nlohmann::json::array()}};
        if (pack.contains("models")) shim["models"] = pack.at("models");
        if (pack.contains("skills")) shim["skills"] = pack.at("skills");

        std::vector<registry::ModelEntry> new_models;
        std::vector<registry::SkillL1> new_skills;
        if (!shim["models"].empty() || !shim["skills"].empty()) {
            // Parse through a scratch registry so the pack enjoys the same
            // schema checks; pad with a placeholder when a side is empty.
            nlohmann::json scratch = shim;
            bool pad_models = scratch["models"].empty();
            bool pad_skills = scratch["skills"].empty();
            if (pad_models) {
                scratch["models"].push_back({{"id", "__pack_pad_model__"},
                                             {"capability_tags", {"pad"}}});
            }
            if (pad_skills) {
                scratch["skills"].push_back(
                    {{"id", "__pack_pad_skill__"},
                     {"children", {{{"id", "__pack_pad_child__"}, {"keywords", {"pad"}}}}}});
            }
            auto parsed = registry::load_registry(scratch);
            for (auto& m : parsed.models) {
                if (m.id != "__pack_pad_model__") new_models.push_back(std::move(m));
            }
            for (auto& s : parsed.skills) {
                if (s.id != "__pack_pad_skill__") new_skills.push_back(std::move(s));
            }
        }

        auto merged = registry::extend_registry(base, new_models, new_skills);
        std::ofstream out(out_path);
        if (!out) throw Error(ErrorCode::IoError, "cannot write " + out_path.string());
        out << registry::to_json(merged).dump(2) << "\n";
        auto stats = registry::compression_stats(merged);
        std::cout << "wrote " << out_path.string() << " (models " << merged.models.size()
                  << ", level-1 " << merged.skills.size() << ", level-2 " << merged.total_level2()
                  << ", ratio " << stats.ratio_num << "/" << stats.ratio_den << ")\n";
        return 0;
    });
}

int cmd_analyze_compatibility(const std::filesystem::path& input_path,
                              const std::filesystem::path& out_csv) {
    return guarded([&]() {
        std::ifstream in(input_path);
        if (!in) throw Error(ErrorCode::IoError, "cannot open " + input_path.string());
        nlohmann::json rows;
        try {
            in >> rows;
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::SchemaError, "not valid JSON: " + std::string(e.what()));
        }
        if (!rows.is_array()) {
            throw Error(ErrorCode::SchemaError, "compatibility input must be a JSON array");
        }
        logio::CsvWriter csv(out_csv, {"context", "model", "skill", "u0", "u_m", "u_k", "u_mk",
                                       "delta_m", "delta_k", "compatibility"});
        for (const auto& row : rows) {
            auto rep = analysis::compatibility(row.at("u0").get<double>(),
                                               row.at("u_m").get<double>(),
                                               row.at("u_k").get<double>(),
                                               row.at("u_mk").get<double>());
            csv.write_row({row.value("context", std::string{}), row.value("model", std::string{}),
                           row.value("skill", std::string{}),
                           logio::CsvWriter::format_double(rep.u0),
                           logio::CsvWriter::format_double(rep.uM),
                           logio::CsvWriter::format_double(rep.uK),
                           logio::CsvWriter::format_double(rep.uMK),
                           logio::CsvWriter::format_double(rep.delta_m),
                           logio::CsvWriter::format_double(rep.delta_k),
                           logio::CsvWriter::format_double(rep.compat)});
        }
        std::cout << "wrote " << out_csv.string() << " (" << rows.size() << " rows)\n";
        return 0;
    });
}

int cmd_analyze_regret(const std::filesystem::path& config_path,
                       const std::vector<std::string>& overrides,
                       const std::filesystem::path& checkpoint, int episodes, bool per_context,
                       const std::filesystem::path& out_csv) {
    return guarded([&]() {
        auto ex = open_experiment(config_path, overrides);
        auto theta = load_or_init(ex, checkpoint);
        if (episodes <= 0) episodes = ex.cfg.eval.episodes;
        RngStream root(ex.cfg.seed);

        std::vector<analysis::PerTypeRegret> per_type;
        auto report = analysis::routing_regret(theta, ex.environment.table, ex.environment, ex.reg,
                                               ex.cfg.train, episodes, root.child("regret"),
                                               analysis::EvalMode::Sample,
                                               per_context ? &per_type : nullptr);

        logio::CsvWriter csv(out_csv, {"scope", "oracle", "achieved", "regret"});
        csv.write_row({"aggregate", logio::CsvWriter::format_double(report.oracle),
                       logio::CsvWriter::format_double(report.achieved),
                       logio::CsvWriter::format_double(report.regret)});
        for (const auto& row : per_type) {
            csv.write_row({row.type, logio::CsvWriter::format_double(row.report.oracle),
                           logio::CsvWriter::format_double(row.report.achieved),
                           logio::CsvWriter::format_double(row.report.regret)});
        }
        std::cout << "oracle " << report.oracle << ", achieved " << report.achieved << ", regret "
                  << report.regret << "\n";
        return 0;
    });
}

int cmd_analyze_expansion(const std::filesystem::path& config_path,
                          const std::vector<std::string>& overrides,
                          const std::filesystem::path& registry_after,
                          const std::optional<std::filesystem::path>& checkpoint,
                          const std::string& table_kind, int episodes,
                          const std::filesystem::path& out_csv) {
    return guarded([&]() {
        auto ex = open_experiment(config_path, overrides);
        auto after = registry::load_registry_file(registry_after);
        auto theta = load_or_init(ex, checkpoint);
        if (episodes <= 0) episodes = ex.cfg.eval.episodes;
        RngStream root(ex.cfg.seed);

        env::UtilityTable table;
        if (table_kind == "planted") {
            table = env::planted_utility_table(ex.cfg.gen, after);
        } else if (table_kind == "random") {
            std::vector<std::string> types;
            for (const auto& t : ex.cfg.gen.task_types) types.push_back(t.label);
            table = env::random_utility_table(types, after, root.child("table"));
        } else {
            throw Error(ErrorCode::ConfigError, "table kind must be planted or random");
        }

        auto report = analysis::expansion_check(table, ex.reg, after, theta, ex.environment,
                                                ex.cfg.train, episodes, root.child("expansion"));

        logio::CsvWriter csv(out_csv,
                             {"oracle_before", "oracle_after", "oracle_gain", "achieved_before",
                              "achieved_after", "practical_gain", "regret_before", "regret_after",
                              "decomposition_residual", "mc_std_error", "oracle_monotonic"});
        csv.write_row({logio::CsvWriter::format_double(report.oracle_before),
                       logio::CsvWriter::format_double(report.oracle_after),
                       logio::CsvWriter::format_double(report.oracle_gain),
                       logio::CsvWriter::format_double(report.achieved_before),
                       logio::CsvWriter::format_double(report.achieved_after),
                       logio::CsvWriter::format_double(report.practical_gain),
                       logio::CsvWriter::format_double(report.regret_before),
                       logio::CsvWriter::format_double(report.regret_after),
                       logio::CsvWriter::format_double(report.decomposition_residual),
                       logio::CsvWriter::format_double(report.mc_std_error),
                       report.oracle_monotonic ? "1" : "0"});
        std::cout << "monotonicity " << (report.oracle_monotonic ? "PASS" : "FAIL")
                  << " (oracle gain " << report.oracle_gain << ", residual "
                  << report.decomposition_residual << ")\n";
        return 0;
    });
}

int cmd_analyze_scaling(const std::filesystem::path& config_path,
                        const std::vector<std::string>& overrides,
                        const std::vector<std::filesystem::path>& registries,
                        const std::filesystem::path& out_csv) {
    return guarded([&]() {
        auto ex = open_experiment(config_path, overrides);
        if (registries.empty()) {
            throw Error(ErrorCode::ConfigError, "scaling needs at least one registry file");
        }
        std::vector<registry::Registry> regs;
        for (const auto& p : registries) regs.push_back(registry::load_registry_file(p));

        RngStream root(ex.cfg.seed);
        auto train_fn = [&](const registry::Registry& reg, const env::Environment& environment,
                            const trainer::TrainConfig& cfg) {
            policy::FeatureLayout layout = ex.layout;
            auto theta = policy::PolicyParameters::zeros(layout, reg.version);
            auto train_rng = root.child("scaling").child(static_cast<std::uint64_t>(reg.skills.size()));
            for (int step = 0; step < cfg.steps; ++step) {
                trainer::UpdateStats stats;
                theta = trainer::train_step(theta, environment, reg, cfg,
                                            train_rng.child(static_cast<std::uint64_t>(step)),
                                            stats);
            }
            return theta;
        };

        auto rows = analysis::skill_scaling_experiment(regs, ex.cfg.gen, ex.cfg.train,
                                                       ex.cfg.eval.episodes, root.child("eval"),
                                                       train_fn);
        logio::CsvWriter csv(out_csv, {"n_level1_skills", "n_level2_skills", "n_models",
                                       "accuracy", "mean_episode_wall_ms"});
        for (const auto& row : rows) {
            csv.write_row({logio::CsvWriter::format_int(row.n_level1),
                           logio::CsvWriter::format_int(row.n_level2),
                           logio::CsvWriter::format_int(row.n_models),
                           logio::CsvWriter::format_double(row.accuracy),
                           logio::CsvWriter::format_double(row.mean_episode_wall_ms)});
            std::cout << "N=" << row.n_level1 << " accuracy " << row.accuracy << "\n";
        }
        return 0;
    });
}

} // namespace maestro::run
