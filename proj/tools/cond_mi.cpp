#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "cmi/config.hpp"
#include "cmi/runner.hpp"

namespace fs = std::filesystem;
using namespace cmi;

namespace {

int fail(Command command, const fs::path& dir, const std::string& reason) {
    std::cerr << "cond-mi " << to_string(command) << ": " << reason << "\n";
    try {
        write_failure_manifest(dir, command, reason);
    } catch (const std::exception& e) {
        std::cerr << "cond-mi: could not write manifest: " << e.what() << "\n";
    }
    return 2;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Conditional contrastive mutual information estimation and fair representation learning"};
    app.set_version_flag("--version", std::string(version_string()));
    app.require_subcommand(1);

    std::string config_file;
    std::string data_dir;
    std::string output_dir;
    std::size_t trials = 10000;
    std::size_t critic_trials = 1000;

    CLI::App* bench = app.add_subcommand("cmi-bench", "Synthetic CMI estimation sweep");
    bench->add_option("--config", config_file, "INI configuration file")->required()->check(CLI::ExistingFile);
    bench->add_option("--output", output_dir, "Output directory (overrides [run] output)");

    CLI::App* fair = app.add_subcommand("fairness", "Fair representation pretraining and evaluation");
    fair->add_option("--config", config_file, "INI configuration file")->required()->check(CLI::ExistingFile);
    fair->add_option("--data", data_dir, "Directory holding german.data or adult.data / adult.test");
    fair->add_option("--output", output_dir, "Output directory (overrides [run] output)");

    CLI::App* oracle = app.add_subcommand("oracle-check", "Exact discrete information inequalities");
    oracle->add_option("--trials", trials, "Random pmfs to check")->check(CLI::PositiveNumber);
    oracle->add_option("--critics", critic_trials, "Random critics per divergence pair")->check(CLI::PositiveNumber);
    oracle->add_option("--output", output_dir, "Output directory");

    CLI::App* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check of every op and objective");
    grad->add_option("--output", output_dir, "Output directory");

    CLI11_PARSE(app, argc, argv);

    const CLI::App* chosen = app.get_subcommands().front();
    const Command command = parse_command(chosen->get_name());
    const fs::path fallback_dir = output_dir.empty() ? fs::path("results") : fs::path(output_dir);

    ExperimentConfig cfg;
    try {
        if (!config_file.empty()) cfg = load_config(config_file);
        if (const auto seed = seed_override_from_env()) cfg.apply_seeds({*seed});
    } catch (const ConfigError& e) {
        return fail(command, fallback_dir, e.what());
    }
    if (command == Command::cmi_bench && !cfg.has_section("cmi-bench"))
        return fail(command, fallback_dir, "config: missing required section [cmi-bench]");
    if (command == Command::fairness && !cfg.has_section("fairness"))
        return fail(command, fallback_dir, "config: missing required section [fairness]");

    RunOptions opts;
    if (!output_dir.empty()) opts.output_dir = output_dir;
    if (!data_dir.empty()) opts.data_dir = data_dir;
    opts.oracle_trials = trials;
    opts.critic_trials = critic_trials;

    const RunOutcome outcome = run_command(command, cfg, opts, std::cout);
    if (!outcome.failure.empty()) std::cerr << "cond-mi " << to_string(command) << ": " << outcome.failure << "\n";
    std::cout << "wrote";
    for (const auto& a : outcome.artifacts) std::cout << ' ' << a.string();
    std::cout << "\n";
    return outcome.exit_code();
}
