#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "json.hpp"

#include "mcalf/config.hpp"

namespace mcalf {

// Stable exit-code contract of every subcommand.
enum ExitCode : int { kExitOk = 0, kExitFailure = 1, kExitConfig = 2 };

// Command-line overrides; everything else comes from the config file.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<std::size_t> workers;
};

void apply_overrides(ExperimentConfig& cfg, const Overrides& overrides);

// Runs every batch described by the config and returns the summary document.
// When `output_dir` is set, also writes summary.json, rollouts.csv, traces and
// critics.json there. `generated_at` is the only non-reproducible field.
nlohmann::json execute_run(const ExperimentConfig& cfg,
                           const std::optional<std::filesystem::path>& output_dir);

// Bound report for a geometric schedule, plus the spatial quantities when the
// config carries a certificate, d_circ and d_star.
nlohmann::json bounds_report(const ExperimentConfig& cfg);

int cmd_run(const std::string& config_path, const Overrides& overrides, std::ostream& out,
            std::ostream& err);
int cmd_verify_bounds(const std::string& config_path, const Overrides& overrides,
                      std::ostream& out, std::ostream& err);
int cmd_acceptance(const std::string& config_dir, const Overrides& overrides, std::ostream& out,
                   std::ostream& err);

}  // namespace mcalf
