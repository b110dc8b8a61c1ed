#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>

#include "crowd/scenario.hpp"

namespace crowd {

struct CliOptions {
    std::filesystem::path out = ".";
    std::optional<double> dx;
    std::optional<double> end_time;
    bool seedless = false;  // accepted for interface stability; nothing is random
};

/// Applies --dx / --end-time to a parsed scenario (including its confinement
/// study) and re-validates.
void apply_overrides(ScenarioConfig& config, const CliOptions& options);

struct EvacuationRun {
    std::string name;
    std::optional<double> exit_time;
    std::uint64_t steps = 0;
    double rho_min = 0.0;
    double rho_max = 0.0;
    double final_mass = 0.0;
    double initial_mass = 0.0;
};

struct BraessReport {
    double fraction = 0.999;
    EvacuationRun baseline;
    EvacuationRun variant;

    /// Both times exist and the variant is strictly faster.
    bool variant_faster() const;
};

/// Runs one scenario until the evacuation fraction is reached or end_time.
EvacuationRun run_evacuation(const ScenarioConfig& config, double fraction);

BraessReport run_braess(const ScenarioConfig& baseline, const ScenarioConfig& variant, double fraction);

/// Executes one subcommand; returns the process exit code
/// (0 ok, 2 invalid input, 3 numerical abort, 1 anything else).
int run_command(const std::string& command, const std::filesystem::path& config_path, const CliOptions& options,
                std::ostream& out, std::ostream& err);

/// Full command-line entry point.
int run_cli(int argc, char** argv);

}  // namespace crowd
