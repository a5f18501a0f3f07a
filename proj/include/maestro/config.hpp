#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "maestro/environment.hpp"
#include "maestro/trainer.hpp"

namespace maestro::config {

inline constexpr int kSchemaVersion = 1;

struct EvalConfig {
    int episodes = 1000;
    int k = 16;
    double temperature = 1.0;
};

// One file drives a fully deterministic run: registry, synthetic world,
// trainer and evaluation settings, all seeded from one global seed.
struct ExperimentConfig {
    int schema_version = kSchemaVersion;
    std::uint64_t seed = 0;
    std::filesystem::path registry_path;
    std::filesystem::path output_dir;
    env::GenConfig gen;
    trainer::TrainConfig train;
    EvalConfig eval;

    void validate() const;
};

ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir);

// Loads the file and applies overrides. Each override is "path.to.field=value"
// with a JSON-parsed value; flags take precedence over the file, the file over
// defaults.
ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides);

nlohmann::json experiment_to_json(const ExperimentConfig& cfg);

} // namespace maestro::config
