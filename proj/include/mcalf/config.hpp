#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"

#include "mcalf/fusion.hpp"
#include "mcalf/mdp.hpp"
#include "mcalf/policies.hpp"
#include "mcalf/schedules.hpp"

namespace mcalf {

inline constexpr int kConfigSchemaVersion = 1;

// Invalid configuration. Carries the offending key path and, when it can be
// located in the source text, the 1-based line number.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string origin, std::string key_path, int line, const std::string& message);

    const std::string& key_path() const noexcept { return key_path_; }
    int line() const noexcept { return line_; }

private:
    std::string key_path_;
    int line_;
};

struct RunSection {
    std::size_t horizon = 200;
    std::size_t n_rollouts = 1000;
    std::uint64_t seed = 0;
    std::size_t workers = 1;
    std::optional<double> d_circ;
    std::optional<double> d_star;
    std::optional<double> d_threshold;
    double gamma = 0.99;
    std::vector<std::size_t> reaching_grid{0, 1, 2, 5, 10};
    std::vector<std::size_t> switch_grid{0, 1, 2, 5, 10};
};

struct OutputSection {
    std::string directory = "mcalf_out";
    std::size_t traces = 0;
    bool csv = true;
    bool jsonl = true;
};

struct ExperimentConfig {
    std::string origin;  // file path or "<string>"
    nlohmann::json raw;
    std::string hash;

    std::shared_ptr<const Mdp> env;
    FusionSetup fusion;
    std::optional<KLCertificate> certificate;
    std::string schedule_kind;  // "geometric" or "gated"
    std::optional<double> lambda;
    std::optional<double> p_relax;
    std::vector<std::pair<std::string, std::shared_ptr<const TabularCritic>>> tabular_critics;

    RunSection run;
    OutputSection output;
};

// FNV-1a over the canonical (key-sorted, compact) JSON serialization.
std::string config_hash(const nlohmann::json& j);

// `base_dir` resolves relative file references (chain transition files).
ExperimentConfig parse_config(const std::string& text, const std::string& origin,
                              const std::string& base_dir = ".");
ExperimentConfig load_config(const std::string& path);

}  // namespace mcalf
