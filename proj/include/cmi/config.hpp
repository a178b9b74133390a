#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cmi/estimators.hpp"
#include "cmi/fairness.hpp"

namespace cmi {

/// Parse or validation failure; `line` is 0 when no single line is at fault.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::size_t line, const std::string& message);
    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

enum class Command { cmi_bench, fairness, oracle_check, gradcheck };

const char* to_string(Command c);
Command parse_command(const std::string& s);

struct FairnessExperiment {
    std::string dataset = "synthetic";  // synthetic, german or adult
    std::vector<Objective> objectives{Objective::infonce, Objective::c_infonce, Objective::weac_infonce};
    FairnessRunConfig run;
    bool iterations_set = false;  // otherwise the per-dataset default applies
    BiasedTabularSpec synthetic;
};

/// Flat INI document:
///
///   # comment            ; comment
///   [run]                output = DIR, seeds = 0, 1, 2
///   [cmi-bench]          estimator and sweep keys
///   [fairness]           pretraining and evaluation keys
///
/// Keys are `name = value`; lists are comma separated. Unknown sections or keys,
/// duplicate keys, and malformed values are errors that name the line.
struct ExperimentConfig {
    std::filesystem::path output_dir = "results";
    std::vector<std::uint64_t> seeds{0, 1, 2};
    SweepPlan sweep;
    FairnessExperiment fairness;
    std::vector<std::string> sections;  // in order of appearance

    bool has_section(const std::string& name) const;
    /// Applies `seeds` to the sweep plan and to the fairness runs.
    void apply_seeds(std::vector<std::uint64_t> s);
    /// Iterations for the fairness run on `dataset` (explicit value or dataset default).
    std::size_t fairness_iterations() const;
};

ExperimentConfig parse_config(std::string_view text);
ExperimentConfig load_config(const std::filesystem::path& file);

/// Canonical INI rendering of every effective setting.
std::string echo_config(const ExperimentConfig& cfg);

/// The `COND_MI_SEED` override, if set. Throws ConfigError when malformed.
std::optional<std::uint64_t> seed_override_from_env();

/// Build version (git describe of the source tree).
const char* version_string();

}  // namespace cmi
