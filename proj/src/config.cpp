#include "maestro/config.hpp"

#include <fstream>

#include "maestro/errors.hpp"

namespace maestro::config {

void ExperimentConfig::validate() const {
    if (schema_version != kSchemaVersion) {
        throw Error(ErrorCode::SchemaError,
                    "unsupported config schema_version " + std::to_string(schema_version));
    }
    if (registry_path.empty()) {
        throw Error(ErrorCode::ConfigError, "config is missing registry_path");
    }
    gen.validate();
    train.validate();
    if (eval.episodes < 1) throw Error(ErrorCode::ConfigError, "eval.episodes must be >= 1");
    if (eval.k < 1) throw Error(ErrorCode::ConfigError, "eval.k must be >= 1");
    if (eval.temperature <= 0.0) {
        throw Error(ErrorCode::ConfigError, "eval.temperature must be positive");
    }
}

ExperimentConfig experiment_from_json(const nlohmann::json& j,
                                      const std::filesystem::path& base_dir) {
    ExperimentConfig cfg;
    cfg.schema_version = j.value("schema_version", kSchemaVersion);
    cfg.seed = j.value("seed", std::uint64_t{0});
    if (j.contains("registry_path")) {
        std::filesystem::path p = j.at("registry_path").get<std::string>();
        cfg.registry_path = p.is_absolute() ? p : base_dir / p;
    }
    if (j.contains("output_dir")) {
        std::filesystem::path p = j.at("output_dir").get<std::string>();
        cfg.output_dir = p.is_absolute() ? p : base_dir / p;
    } else {
        cfg.output_dir = base_dir / "out";
    }
    if (j.contains("env")) cfg.gen = env::gen_config_from_json(j.at("env"));
    if (j.contains("train")) cfg.train = trainer::train_config_from_json(j.at("train"));
    if (j.contains("eval")) {
        const auto& e = j.at("eval");
        cfg.eval.episodes = e.value("episodes", cfg.eval.episodes);
        cfg.eval.k = e.value("k", cfg.eval.k);
        cfg.eval.temperature = e.value("temperature", cfg.eval.temperature);
    }
    cfg.validate();
    return cfg;
}

namespace {

void apply_override(nlohmann::json& j, const std::string& spec) {
    auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw Error(ErrorCode::ConfigError, "override must look like path.to.field=value: " + spec);
    }
    std::string path = spec.substr(0, eq);
    std::string value = spec.substr(eq + 1);

    nlohmann::json parsed;
    try {
        parsed = nlohmann::json::parse(value);
    } catch (const nlohmann::json::exception&) {
        parsed = value; // unquoted strings are taken literally
    }

    nlohmann::json* node = &j;
    std::size_t start = 0;
    while (true) {
        auto dot = path.find('.', start);
        std::string key = path.substr(start, dot == std::string::npos ? dot : dot - start);
        if (key.empty()) {
            throw Error(ErrorCode::ConfigError, "override path has an empty segment: " + spec);
        }
        if (dot == std::string::npos) {
            (*node)[key] = parsed;
            break;
        }
        node = &(*node)[key];
        start = dot + 1;
    }
}

} // namespace

ExperimentConfig load_experiment(const std::filesystem::path& path,
                                 const std::vector<std::string>& overrides) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorCode::IoError, "cannot open config " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::SchemaError,
                    "config " + path.string() + " is not valid JSON: " + e.what());
    }
    for (const auto& o : overrides) apply_override(j, o);
    return experiment_from_json(j, path.parent_path());
}

nlohmann::json experiment_to_json(const ExperimentConfig& cfg) {
    return nlohmann::json{{"schema_version", cfg.schema_version},
                          {"seed", cfg.seed},
                          {"registry_path", cfg.registry_path.string()},
                          {"output_dir", cfg.output_dir.string()},
                          {"env", env::gen_config_to_json(cfg.gen)},
                          {"train", trainer::train_config_to_json(cfg.train)},
                          {"eval",
                           {{"episodes", cfg.eval.episodes},
                            {"k", cfg.eval.k},
                            {"temperature", cfg.eval.temperature}}}};
}

} // namespace maestro::config
