#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace mcalf {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string detail;
    double seconds = 0.0;
};

struct AcceptanceContext {
    std::size_t workers = 1;
    // Relative file references inside criterion parameters resolve here.
    std::filesystem::path base_dir = ".";
    // Criterion 9 writes its run outputs below this directory.
    std::filesystem::path scratch_dir;
};

inline constexpr int kCriterionCount = 9;

std::string criterion_name(int id);

// Runs criterion `id` (1..9). Every parameter has a default pinned in code; the
// entries of `params` override them. Unknown criteria or malformed parameters
// raise ConfigError; runtime failures are reported as failing results.
CriterionResult run_criterion(int id, const nlohmann::json& params, const AcceptanceContext& ctx);

// "PASS  C2  name  detail  (1.23 s)"
std::string format_result_line(const CriterionResult& result);

// Built-in experiment documents used when a criterion names none.
nlohmann::json default_scalar_experiment();
nlohmann::json default_chain_experiment();

}  // namespace mcalf
