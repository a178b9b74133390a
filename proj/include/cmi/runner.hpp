#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "cmi/config.hpp"

namespace cmi {

struct RunOptions {
    std::optional<std::filesystem::path> output_dir;  // overrides [run] output
    std::optional<std::filesystem::path> data_dir;    // UCI files for the fairness command
    std::size_t oracle_trials = 10000;
    std::size_t critic_trials = 1000;
    std::vector<std::uint64_t> gradcheck_seeds{1, 2, 3};
};

struct RunOutcome {
    bool completed = false;         // pipeline ran to the end
    bool invariants_held = false;   // every hard invariant checked after the run
    std::string failure;            // empty on success
    std::vector<std::filesystem::path> artifacts;
    double seconds = 0.0;

    int exit_code() const { return completed && invariants_held ? 0 : 1; }
};

/// Runs one command, writes its CSV artifacts plus manifest.json into the output
/// directory, and prints a human-readable summary to `log`. The manifest is
/// written even when the run fails. Module errors are caught and reported in the
/// outcome rather than thrown.
RunOutcome run_command(Command command, const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log);

/// manifest.json for a run that could not start (for example a config error).
void write_failure_manifest(const std::filesystem::path& dir, Command command, const std::string& reason);

/// Rewrites CSV text with the trailing `seconds` column emptied, for comparisons.
std::string strip_seconds_column(const std::string& csv);

}  // namespace cmi
