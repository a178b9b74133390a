#include "cmi/runner.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <exception>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "json.hpp"

#include "cmi/discrete_oracle.hpp"
#include "cmi/gradcheck.hpp"

namespace cmi {

namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

std::string utc_timestamp() {
    const std::time_t now = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream os;
    os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return os.str();
}

void write_text(const fs::path& file, const std::string& text) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + file.string());
    out << text;
    if (!out) throw std::runtime_error("write failed for " + file.string());
}

struct Manifest {
    Command command;
    std::string started_at = utc_timestamp();
    std::string config;
    std::vector<std::uint64_t> seeds;
    json extra = json::object();
};

void write_manifest(const fs::path& dir, const Manifest& m, const RunOutcome& outcome) {
    json j;
    j["command"] = to_string(m.command);
    j["version"] = version_string();
    j["started_at"] = m.started_at;
    j["wall_clock_seconds"] = outcome.seconds;
    j["threads"] = omp_get_max_threads();
    j["seeds"] = m.seeds;
    j["status"] = !outcome.completed ? "failed" : (outcome.invariants_held ? "ok" : "invariant_violation");
    j["failure"] = outcome.failure.empty() ? json(nullptr) : json(outcome.failure);
    json artifacts = json::array();
    for (const auto& a : outcome.artifacts) artifacts.push_back(a.filename().string());
    j["artifacts"] = artifacts;
    j["config"] = m.config;
    if (!m.extra.empty()) j["summary"] = m.extra;
    fs::create_directories(dir);
    write_text(dir / "manifest.json", j.dump(2) + "\n");
}

double median(std::vector<double> v) {
    if (v.empty()) return std::nan("");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

void run_cmi_bench(const ExperimentConfig& cfg, const fs::path& dir, RunOutcome& outcome, Manifest& manifest,
                   std::ostream& log) {
    const std::vector<SweepRow> rows = run_sweep(cfg.sweep);
    const fs::path csv = dir / "cmi_bench.csv";
    std::ostringstream text;
    write_sweep_csv(text, rows, true);
    write_text(csv, text.str());
    outcome.artifacts.push_back(csv);
    outcome.completed = true;

    const double ceiling = std::log(static_cast<double>(cfg.sweep.base.batch)) + 1e-9;
    std::size_t violations = 0;
    std::size_t warnings = 0;
    for (const auto& r : rows) {
        const auto& s = r.series;
        bool ok = s.epoch_objective.size() == cfg.sweep.base.epochs && std::isfinite(s.estimate_train) &&
                  std::isfinite(s.estimate_test) && s.estimate_train <= ceiling && s.estimate_test <= ceiling;
        for (double v : s.epoch_objective) ok = ok && std::isfinite(v) && v <= ceiling;
        violations += !ok;
        warnings += s.warnings.size();
    }
    outcome.invariants_held = violations == 0;
    if (violations) outcome.failure = std::to_string(violations) + " run(s) broke the finite / log n invariants";

    // Median held-out estimate per (objective, axis value) across seeds.
    std::map<std::pair<std::size_t, int>, std::vector<double>> groups;
    std::map<std::size_t, double> truth;
    for (const auto& r : rows) {
        groups[{r.axis_value, static_cast<int>(r.objective)}].push_back(r.series.estimate_test);
        truth[r.axis_value] = r.series.true_value;
    }
    log << "cmi-bench: " << to_string(cfg.sweep.variant) << ", axis " << to_string(cfg.sweep.axis) << ", "
        << rows.size() << " runs\n";
    log << std::left << std::setw(12) << to_string(cfg.sweep.axis) << std::setw(18) << "objective" << std::setw(14)
        << "median_test" << "truth\n";
    json summary = json::array();
    for (const auto& [key, values] : groups) {
        const double m = median(values);
        const auto o = static_cast<Objective>(key.second);
        log << std::left << std::setw(12) << key.first << std::setw(18) << to_string(o) << std::setw(14) << std::fixed
            << std::setprecision(4) << m << truth[key.first] << std::defaultfloat << "\n";
        summary.push_back({{"axis_value", key.first}, {"objective", to_string(o)}, {"median_test", m},
                           {"truth", truth[key.first]}});
    }
    if (warnings) log << warnings << " sampler notice(s): some outcomes were smaller than the batch size\n";
    manifest.extra["medians"] = summary;
    manifest.extra["invariant_violations"] = violations;
}

TabularDataset fairness_data(const ExperimentConfig& cfg, const RunOptions& opts, std::uint64_t seed) {
    if (cfg.fairness.dataset == "synthetic") {
        BiasedTabularSpec spec = cfg.fairness.synthetic;
        spec.seed = seed;
        return make_biased_tabular(spec);
    }
    if (!opts.data_dir) throw std::invalid_argument("dataset '" + cfg.fairness.dataset + "' needs --data DIR");
    return load_uci(cfg.fairness.dataset, *opts.data_dir);
}

void run_fairness_command(const ExperimentConfig& cfg, const RunOptions& opts, const fs::path& dir,
                          RunOutcome& outcome, Manifest& manifest, std::ostream& log) {
    struct Job {
        Objective objective;
        std::uint64_t seed;
        FairnessReport report;
        FairEncoder encoder;
    };
    std::vector<Job> jobs;
    for (std::uint64_t s : cfg.seeds)
        for (Objective o : cfg.fairness.objectives) jobs.push_back({o, s, {}, {}});

    // UCI data does not depend on the seed; load it once.
    std::optional<TabularDataset> shared;
    if (cfg.fairness.dataset != "synthetic") shared = fairness_data(cfg, opts, 0);

    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(jobs.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        Job& job = jobs[static_cast<std::size_t>(i)];
        try {
            const TabularDataset data = shared ? *shared : fairness_data(cfg, opts, job.seed);
            FairnessRunConfig rc = cfg.fairness.run;
            rc.objective = job.objective;
            rc.seed = job.seed;
            rc.iterations = cfg.fairness_iterations();
            job.encoder = pretrain_fair(data, rc);
            job.report = evaluate_downstream(job.encoder, data, rc);
        } catch (...) {
#pragma omp critical(cmi_fairness_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);

    const fs::path csv = dir / "fairness.csv";
    std::ostringstream text;
    write_fairness_csv_header(text);
    for (const auto& j : jobs) write_fairness_csv_row(text, cfg.fairness.dataset, j.report, true);
    write_text(csv, text.str());
    outcome.artifacts.push_back(csv);
    outcome.completed = true;

    std::size_t violations = 0;
    const auto in_unit = [](double v) { return std::isnan(v) || (v >= 0.0 && v <= 1.0); };
    for (const auto& j : jobs) {
        bool ok = in_unit(j.report.delta_dp) && in_unit(j.report.roc_auc);
        for (double l : j.encoder.lambda_history)
            ok = ok && l >= cfg.fairness.run.lambda_min && l <= cfg.fairness.run.lambda_max;
        violations += !ok;
        log << format_report(cfg.fairness.dataset, j.report);
    }
    outcome.invariants_held = violations == 0;
    if (violations) outcome.failure = std::to_string(violations) + " run(s) broke the metric / lambda range invariants";
    manifest.extra["dataset"] = cfg.fairness.dataset;
    manifest.extra["iterations"] = cfg.fairness_iterations();
    manifest.extra["invariant_violations"] = violations;
}

void run_oracle_command(const RunOptions& opts, std::uint64_t seed, RunOutcome& outcome, Manifest& manifest,
                        std::ostream& log) {
    const OracleSuiteReport r = run_oracle_suite(opts.oracle_trials, opts.critic_trials, seed);
    outcome.completed = true;
    outcome.invariants_held = r.ok();
    if (!r.ok()) outcome.failure = "discrete oracle inequalities violated";
    log << "oracle-check: " << r.pmfs << " random pmfs, " << r.ordering_violations
        << " weak-CMI ordering violations, max chain-rule error " << r.max_chain_rule_error << "\n"
        << "  " << r.independence_cases << " conditionally independent pmfs, " << r.independence_violations
        << " violations\n"
        << "  " << r.critics << " random critics, " << r.critic_violations << " variational bound violations, "
        << "optimum gap " << r.max_optimum_gap << "\n";
    manifest.extra = {{"pmfs", r.pmfs},
                      {"ordering_violations", r.ordering_violations},
                      {"max_chain_rule_error", r.max_chain_rule_error},
                      {"independence_cases", r.independence_cases},
                      {"independence_violations", r.independence_violations},
                      {"critics", r.critics},
                      {"critic_violations", r.critic_violations},
                      {"max_optimum_gap", r.max_optimum_gap}};
}

void run_gradcheck_command(const RunOptions& opts, RunOutcome& outcome, Manifest& manifest, std::ostream& log) {
    std::map<std::string, double> worst;
    for (std::uint64_t s : opts.gradcheck_seeds)
        for (const auto& r : run_gradcheck_suite(s)) worst[r.name] = std::max(worst[r.name], r.max_rel_error);
    double overall = 0.0;
    for (const auto& [name, err] : worst) {
        log << std::left << std::setw(34) << name << err << "\n";
        overall = std::max(overall, err);
    }
    log << "gradcheck: " << worst.size() << " checks, max relative error " << overall << "\n";
    outcome.completed = true;
    outcome.invariants_held = overall < 1e-3;
    if (!outcome.invariants_held) outcome.failure = "max relative gradient error " + std::to_string(overall) + " >= 1e-3";
    manifest.extra = {{"checks", worst.size()}, {"max_rel_error", overall}};
    manifest.seeds = opts.gradcheck_seeds;
}

}  // namespace

RunOutcome run_command(Command command, const ExperimentConfig& cfg, const RunOptions& opts, std::ostream& log) {
    const auto t0 = Clock::now();
    const fs::path dir = opts.output_dir ? *opts.output_dir : cfg.output_dir;
    Manifest manifest{command};
    manifest.config = echo_config(cfg);
    manifest.seeds = cfg.seeds;
    RunOutcome outcome;
    try {
        fs::create_directories(dir);
        switch (command) {
            case Command::cmi_bench: run_cmi_bench(cfg, dir, outcome, manifest, log); break;
            case Command::fairness: run_fairness_command(cfg, opts, dir, outcome, manifest, log); break;
            case Command::oracle_check:
                run_oracle_command(opts, cfg.seeds.empty() ? 0 : cfg.seeds.front(), outcome, manifest, log);
                break;
            case Command::gradcheck: run_gradcheck_command(opts, outcome, manifest, log); break;
        }
    } catch (const std::exception& e) {
        outcome.completed = false;
        outcome.failure = e.what();
    }
    outcome.seconds = std::chrono::duration<double>(Clock::now() - t0).count();
    try {
        write_manifest(dir, manifest, outcome);
        outcome.artifacts.push_back(dir / "manifest.json");
    } catch (const std::exception& e) {
        outcome.completed = false;
        if (outcome.failure.empty()) outcome.failure = e.what();
    }
    return outcome;
}

void write_failure_manifest(const fs::path& dir, Command command, const std::string& reason) {
    Manifest m{command};
    RunOutcome o;
    o.failure = reason;
    write_manifest(dir, m, o);
}

std::string strip_seconds_column(const std::string& csv) {
    std::istringstream in(csv);
    std::ostringstream out;
    bool header = true;
    for (std::string line; std::getline(in, line);) {
        if (!header) {
            const auto comma = line.rfind(',');
            if (comma != std::string::npos) line.erase(comma + 1);
        }
        header = false;
        out << line << '\n';
    }
    return out.str();
}

}  // namespace cmi
