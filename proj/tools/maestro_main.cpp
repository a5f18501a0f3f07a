#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "maestro/run.hpp"

int main(int argc, char** argv) {
    CLI::App app{"maestro: RL-driven model-skill orchestration engine"};
    app.require_subcommand(1);

    // Shared options
    std::string config_path;
    std::vector<std::string> overrides;
    auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "experiment config JSON")->required();
        cmd->add_option("--set", overrides,
                        "override a config field, e.g. --set train.steps=100 "
                        "(flag > config > default)");
    };

    // train
    auto* train = app.add_subcommand("train", "run GRPO training");
    add_config(train);
    int workers = 0;
    train->add_option("--workers", workers, "parallel rollout workers within a group");

    // eval
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    add_config(eval);
    std::string checkpoint;
    std::string eval_mode = "greedy";
    int k = 0;
    eval->add_option("--checkpoint", checkpoint, "policy checkpoint JSON")->required();
    eval->add_option("--mode", eval_mode, "greedy | pass_at_k | sc_at_k");
    eval->add_option("--k", k, "samples per task for pass@k / sc@k");

    // rollout
    auto* rollout = app.add_subcommand("rollout", "dump episodes without training");
    add_config(rollout);
    std::string rollout_checkpoint;
    int episodes = 16;
    std::string out_path = "rollouts.jsonl";
    rollout->add_option("--checkpoint", rollout_checkpoint, "optional checkpoint");
    rollout->add_option("--episodes", episodes, "number of episodes");
    rollout->add_option("--out", out_path, "output JSONL path");

    // registry
    auto* reg = app.add_subcommand("registry", "registry tooling");
    reg->require_subcommand(1);
    std::string reg_file, pack_file, merged_file;
    auto* reg_validate = reg->add_subcommand("validate", "schema-check a registry file");
    reg_validate->add_option("file", reg_file, "registry JSON")->required();
    auto* reg_stats = reg->add_subcommand("stats", "print action-space compression stats");
    reg_stats->add_option("file", reg_file, "registry JSON")->required();
    auto* reg_extend = reg->add_subcommand("extend", "merge an extension pack into a registry");
    reg_extend->add_option("base", reg_file, "base registry JSON")->required();
    reg_extend->add_option("pack", pack_file, "extension pack JSON")->required();
    reg_extend->add_option("--out", merged_file, "merged registry output")->required();

    // analyze
    auto* analyze = app.add_subcommand("analyze", "theory and evaluation diagnostics");
    analyze->require_subcommand(1);
    std::string input_file, out_csv = "analysis.csv", after_file, table_kind = "planted";
    std::string analyze_checkpoint;
    int analyze_episodes = 0;
    bool per_context = false;
    std::vector<std::string> scaling_registries;

    auto* compat = analyze->add_subcommand("compatibility", "joint-gain decomposition");
    compat->add_option("--input", input_file, "JSON array of utility quadruples")->required();
    compat->add_option("--out", out_csv, "output CSV");

    auto* regret = analyze->add_subcommand("regret", "oracle minus achieved utility");
    add_config(regret);
    regret->add_option("--checkpoint", analyze_checkpoint, "policy checkpoint")->required();
    regret->add_option("--episodes", analyze_episodes, "Monte Carlo episodes");
    regret->add_flag("--per-context", per_context, "report one row per task type");
    regret->add_option("--out", out_csv, "output CSV");

    auto* expansion = analyze->add_subcommand("expansion", "registry-expansion diagnostics");
    add_config(expansion);
    expansion->add_option("--after", after_file, "extended registry JSON")->required();
    expansion->add_option("--checkpoint", analyze_checkpoint, "optional checkpoint");
    expansion->add_option("--table", table_kind, "planted | random");
    expansion->add_option("--episodes", analyze_episodes, "Monte Carlo episodes");
    expansion->add_option("--out", out_csv, "output CSV");

    auto* scaling = analyze->add_subcommand("scaling", "accuracy vs skill-pool size");
    add_config(scaling);
    scaling->add_option("--registries", scaling_registries, "nested registry files, small to large")
        ->required();
    scaling->add_option("--out", out_csv, "output CSV");

    CLI11_PARSE(app, argc, argv);

    if (train->parsed()) {
        if (workers > 0) overrides.push_back("train.workers=" + std::to_string(workers));
        return maestro::run::cmd_train(config_path, overrides);
    }
    if (eval->parsed()) {
        return maestro::run::cmd_eval(config_path, overrides, checkpoint, eval_mode, k);
    }
    if (rollout->parsed()) {
        std::optional<std::filesystem::path> ckpt;
        if (!rollout_checkpoint.empty()) ckpt = rollout_checkpoint;
        return maestro::run::cmd_rollout(config_path, overrides, ckpt, episodes, out_path);
    }
    if (reg_validate->parsed()) return maestro::run::cmd_registry_validate(reg_file);
    if (reg_stats->parsed()) return maestro::run::cmd_registry_stats(reg_file);
    if (reg_extend->parsed()) {
        return maestro::run::cmd_registry_extend(reg_file, pack_file, merged_file);
    }
    if (compat->parsed()) return maestro::run::cmd_analyze_compatibility(input_file, out_csv);
    if (regret->parsed()) {
        return maestro::run::cmd_analyze_regret(config_path, overrides, analyze_checkpoint,
                                                analyze_episodes, per_context, out_csv);
    }
    if (expansion->parsed()) {
        std::optional<std::filesystem::path> ckpt;
        if (!analyze_checkpoint.empty()) ckpt = analyze_checkpoint;
        return maestro::run::cmd_analyze_expansion(config_path, overrides, after_file, ckpt,
                                                   table_kind, analyze_episodes, out_csv);
    }
    if (scaling->parsed()) {
        std::vector<std::filesystem::path> regs(scaling_registries.begin(),
                                                scaling_registries.end());
        return maestro::run::cmd_analyze_scaling(config_path, overrides, regs, out_csv);
    }
    return 1;
}
