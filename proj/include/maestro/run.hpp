#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace maestro::run {

// Subcommand entry points shared by the CLI and the tests. Each returns a
// process exit status: 0 success, 1 user error, 2 internal error. Failures
// print a machine-readable JSON error record to stderr.

int cmd_train(const std::filesystem::path& config_path, const std::vector<std::string>& overrides);

int cmd_eval(const std::filesystem::path& config_path, const std::vector<std::string>& overrides,
             const std::filesystem::path& checkpoint, const std::string& mode, int k);

int cmd_rollout(const std::filesystem::path& config_path,
                const std::vector<std::string>& overrides,
                const std::optional<std::filesystem::path>& checkpoint, int episodes,
                const std::filesystem::path& out_path);

int cmd_registry_validate(const std::filesystem::path& registry_path);
int cmd_registry_stats(const std::filesystem::path& registry_path);
int cmd_registry_extend(const std::filesystem::path& base_path,
                        const std::filesystem::path& pack_path,
                        const std::filesystem::path& out_path);

int cmd_analyze_compatibility(const std::filesystem::path& input_path,
                              const std::filesystem::path& out_csv);
int cmd_analyze_regret(const std::filesystem::path& config_path,
                       const std::vector<std::string>& overrides,
                       const std::filesystem::path& checkpoint, int episodes, bool per_context,
                       const std::filesystem::path& out_csv);
int cmd_analyze_expansion(const std::filesystem::path& config_path,
                          const std::vector<std::string>& overrides,
                          const std::filesystem::path& registry_after,
                          const std::optional<std::filesystem::path>& checkpoint,
                          const std::string& table_kind, int episodes,
                          const std::filesystem::path& out_csv);
int cmd_analyze_scaling(const std::filesystem::path& config_path,
                        const std::vector<std::string>& overrides,
                        const std::vector<std::filesystem::path>& registries,
                        const std::filesystem::path& out_csv);

} // namespace maestro::run
