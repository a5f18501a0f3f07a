#pragma once

#include <string>
#include <vector>

#include "maestro/config.hpp"
#include "maestro/environment.hpp"
#include "maestro/policy.hpp"
#include "maestro/registry.hpp"
#include "maestro/rng.hpp"

namespace support {

inline std::filesystem::path config_dir() { return MAESTRO_CONFIG_DIR; }

inline maestro::registry::Registry default_registry() {
    return maestro::registry::load_registry_file(config_dir() / "registry_default.json");
}

inline maestro::registry::Registry augmented_registry() {
    return maestro::registry::load_registry_file(config_dir() / "registry_augmented.json");
}

inline maestro::config::ExperimentConfig default_experiment() {
    return maestro::config::load_experiment(config_dir() / "experiment_default.json", {});
}

inline maestro::policy::FeatureLayout default_layout(const maestro::env::GenConfig& gen,
                                                     int t_max = 4) {
    maestro::policy::FeatureLayout layout;
    layout.tag_dim = gen.tag_dim;
    layout.task_dim = gen.tag_dim;
    layout.t_max = t_max;
    return layout;
}

// A tiny two-model, two-skill registry for focused unit tests.
inline maestro::registry::Registry small_registry() {
    using namespace maestro::registry;
    ModelEntry m0{"m", "small expert", {"alpha"}, SyntheticBackend{}};
    ModelEntry m1{"n", "other expert", {"beta"}, SyntheticBackend{}};
    SkillL1 s0{"s", "skill s", RoutingMode::Keyword,
               {SkillL2{"s_child", {"alpha"}, "doc s"}}, 0, {"alpha"}};
    SkillL1 s1{"t", "skill t", RoutingMode::Keyword,
               {SkillL2{"t_child", {"beta"}, "doc t"}}, 0, {"beta"}};
    Registry reg;
    reg.models = {m0, m1};
    reg.skills = {s0, s1};
    reg.version = 1;
    return reg;
}

inline std::string random_identifier(maestro::RngStream& rng, std::size_t len = 6) {
    static constexpr char alphabet[] =
        "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
    std::string out;
    for (std::size_t i = 0; i < len; ++i) {
        out.push_back(alphabet[rng.next_below(sizeof(alphabet) - 1)]);
    }
    return out;
}

inline std::string random_words(maestro::RngStream& rng, std::size_t n_words) {
    std::string out;
    for (std::size_t i = 0; i < n_words; ++i) {
        if (i) out.push_back(' ');
        out += random_identifier(rng, 1 + rng.next_below(8));
    }
    return out;
}

} // namespace support
