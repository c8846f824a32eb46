#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "dmot/sim.hpp"

namespace dmot {

struct SweepSpec {
    std::filesystem::path base_config;
    std::vector<double> sigma_t_levels;
    int seeds_per_level = 1;
    std::vector<std::string> modes;  // off, static, dynamic, dynamic_reactive, gt_localization
    uint64_t base_seed = 0;          // 0 = take the base config's seed
};

SweepSpec load_sweep_spec(const std::filesystem::path& path);

/// Rewrite a config for one of the named comparison modes.
void apply_mode(ScenarioConfig& cfg, const std::string& mode);

/// Run a scenario, write its log directory, and evaluate it from the written
/// files. Returns a process exit status.
int cmd_run(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
            std::optional<uint64_t> seed_override = std::nullopt);

/// Run modes x sigma_t levels x seeds and write one long-format CSV row per
/// cell.
int cmd_sweep(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
              int threads = 1);

/// Re-evaluate a written run directory.
int cmd_eval(const std::filesystem::path& runlog_dir,
             std::optional<double> d_match_override = std::nullopt);

}  // namespace dmot
