#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mcalf/app.hpp"

int main(int argc, char** argv) {
    CLI::App app{"Monte Carlo verification of fused reinforcement-learning policies"};
    app.require_subcommand(1);

    std::string config;
    std::string directory;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> output;
    std::optional<std::size_t> workers;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--seed", seed, "Override the master seed");
        cmd->add_option("--output", output, "Override the output directory");
        cmd->add_option("--workers", workers, "Maximum number of rollout threads")->check(CLI::PositiveNumber);
    };

    auto* run = app.add_subcommand("run", "Run the experiment described by a config file");
    run->add_option("config", config, "Experiment config (JSON)")->required();
    add_common(run);

    auto* bounds = app.add_subcommand("verify-bounds", "Emit the bound report for a config's schedule");
    bounds->add_option("config", config, "Experiment config (JSON)")->required();
    add_common(bounds);

    auto* acceptance = app.add_subcommand("acceptance", "Run the acceptance suite in a directory");
    acceptance->add_option("directory", directory, "Directory of criterion files")->required();
    add_common(acceptance);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? mcalf::kExitOk : mcalf::kExitConfig;
    }

    const mcalf::Overrides overrides{seed, output, workers};
    if (run->parsed()) return mcalf::cmd_run(config, overrides, std::cout, std::cerr);
    if (bounds->parsed()) return mcalf::cmd_verify_bounds(config, overrides, std::cout, std::cerr);
    return mcalf::cmd_acceptance(directory, overrides, std::cout, std::cerr);
}
