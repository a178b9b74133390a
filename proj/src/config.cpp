#include "cmi/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace cmi {

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::stringstream ss(value);
    for (std::string item; std::getline(ss, item, ',');) {
        item = trim(item);
        if (item.empty()) throw std::invalid_argument("empty list item in '" + value + "'");
        out.push_back(item);
    }
    if (out.empty()) throw std::invalid_argument("expected a non-empty list");
    return out;
}

std::uint64_t to_u64(const std::string& v) {
    if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos)
        throw std::invalid_argument("expected a non-negative integer, got '" + v + "'");
    errno = 0;
    const unsigned long long r = std::strtoull(v.c_str(), nullptr, 10);
    if (errno == ERANGE) throw std::invalid_argument("integer out of range: '" + v + "'");
    return r;
}

std::size_t to_count(const std::string& v) {
    const std::uint64_t r = to_u64(v);
    if (r == 0) throw std::invalid_argument("expected a positive integer, got '" + v + "'");
    return static_cast<std::size_t>(r);
}

double to_double(const std::string& v) {
    char* end = nullptr;
    errno = 0;
    const double r = std::strtod(v.c_str(), &end);
    if (v.empty() || end != v.c_str() + v.size() || errno == ERANGE || !std::isfinite(r))
        throw std::invalid_argument("expected a finite number, got '" + v + "'");
    return r;
}

double to_positive(const std::string& v) {
    const double r = to_double(v);
    if (!(r > 0.0)) throw std::invalid_argument("expected a positive number, got '" + v + "'");
    return r;
}

double to_unit_interval(const std::string& v) {
    const double r = to_double(v);
    if (!(r >= 0.0 && r < 1.0)) throw std::invalid_argument("expected a value in [0, 1), got '" + v + "'");
    return r;
}

std::vector<Objective> to_objectives(const std::string& v, bool allow_difference) {
    std::vector<Objective> out;
    for (const auto& item : split_list(v)) {
        const Objective o = parse_objective(item);
        if (!allow_difference && o == Objective::difference_based)
            throw std::invalid_argument("difference_based is not a pretraining objective");
        out.push_back(o);
    }
    return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&)>;
using SectionKeys = std::map<std::string, Setter>;

const std::map<std::string, SectionKeys>& grammar() {
    static const std::map<std::string, SectionKeys> g = {
        {"run",
         {
             {"output", [](ExperimentConfig& c, const std::string& v) {
                  if (v.empty()) throw std::invalid_argument("output must not be empty");
                  c.output_dir = v;
              }},
             {"seeds", [](ExperimentConfig& c, const std::string& v) {
                  c.seeds.clear();
                  for (const auto& s : split_list(v)) c.seeds.push_back(to_u64(s));
              }},
         }},
        {"cmi-bench",
         {
             {"variant", [](ExperimentConfig& c, const std::string& v) { c.sweep.variant = parse_variant(v); }},
             {"axis", [](ExperimentConfig& c, const std::string& v) { c.sweep.axis = parse_axis(v); }},
             {"values", [](ExperimentConfig& c, const std::string& v) {
                  c.sweep.values.clear();
                  for (const auto& s : split_list(v)) c.sweep.values.push_back(to_count(s));
              }},
             {"n", [](ExperimentConfig& c, const std::string& v) { c.sweep.fixed_n = to_count(v); }},
             {"d_z", [](ExperimentConfig& c, const std::string& v) { c.sweep.fixed_d_z = to_count(v); }},
             {"sigma_eps_sq", [](ExperimentConfig& c, const std::string& v) { c.sweep.sigma_eps_sq = to_positive(v); }},
             {"objectives", [](ExperimentConfig& c, const std::string& v) { c.sweep.objectives = to_objectives(v, true); }},
             {"critic", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.critic = parse_critic_kind(v); }},
             {"similarity", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.similarity = parse_similarity(v); }},
             {"hidden", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.hidden = to_count(v); }},
             {"out", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.out = to_count(v); }},
             {"depth", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.depth = to_count(v); }},
             {"tau", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.tau = to_positive(v); }},
             {"clusters", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.clusters = to_count(v); }},
             {"batch", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.batch = to_count(v); }},
             {"epochs", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.epochs = to_count(v); }},
             {"keys_per_step", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.keys_per_step = to_count(v); }},
             {"lr", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.adam.lr = to_positive(v); }},
             {"beta1", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.adam.beta1 = to_unit_interval(v); }},
             {"beta2", [](ExperimentConfig& c, const std::string& v) { c.sweep.base.adam.beta2 = to_unit_interval(v); }},
         }},
        {"fairness",
         {
             {"dataset", [](ExperimentConfig& c, const std::string& v) {
                  if (v != "synthetic" && v != "german" && v != "adult")
                      throw std::invalid_argument("dataset must be synthetic, german or adult, got '" + v + "'");
                  c.fairness.dataset = v;
              }},
             {"objectives", [](ExperimentConfig& c, const std::string& v) { c.fairness.objectives = to_objectives(v, false); }},
             {"epsilon", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.epsilon = to_positive(v); }},
             {"lambda_init", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.lambda_init = to_positive(v); }},
             {"lambda_min", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.lambda_min = to_positive(v); }},
             {"lambda_max", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.lambda_max = to_positive(v); }},
             {"dual_rate", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.dual_rate = to_positive(v); }},
             {"hidden", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.hidden = to_count(v); }},
             {"rep_width", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.rep_width = to_count(v); }},
             {"critic_hidden", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.critic_hidden = to_count(v); }},
             {"critic_out", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.critic_out = to_count(v); }},
             {"tau", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.tau = to_positive(v); }},
             {"batch", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.batch = to_count(v); }},
             {"iterations", [](ExperimentConfig& c, const std::string& v) {
                  c.fairness.run.iterations = to_count(v);
                  c.fairness.iterations_set = true;
              }},
             {"lr", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.adam.lr = to_positive(v); }},
             {"beta1", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.adam.beta1 = to_unit_interval(v); }},
             {"beta2", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.adam.beta2 = to_unit_interval(v); }},
             {"lr_decay", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.lr_decay = to_positive(v); }},
             {"decay_every", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.decay_every = to_count(v); }},
             {"probe_steps", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.probe_steps = to_count(v); }},
             {"head_iterations", [](ExperimentConfig& c, const std::string& v) { c.fairness.run.head_iterations = to_count(v); }},
             {"synthetic_n", [](ExperimentConfig& c, const std::string& v) { c.fairness.synthetic.n = to_count(v); }},
         }},
    };
    return g;
}

template <typename T>
std::string join(const std::vector<T>& items) {
    std::ostringstream os;
    for (std::size_t i = 0; i < items.size(); ++i) os << (i ? ", " : "") << items[i];
    return os.str();
}

// Shortest text that parses back to the same double.
std::string num(double v) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::string join_objectives(const std::vector<Objective>& items) {
    std::vector<std::string> names;
    for (Objective o : items) names.emplace_back(to_string(o));
    return join(names);
}

}  // namespace

ConfigError::ConfigError(std::size_t line, const std::string& message)
    : std::runtime_error(line ? "config line " + std::to_string(line) + ": " + message : "config: " + message),
      line_(line) {}

const char* to_string(Command c) {
    switch (c) {
        case Command::cmi_bench: return "cmi-bench";
        case Command::fairness: return "fairness";
        case Command::oracle_check: return "oracle-check";
        case Command::gradcheck: return "gradcheck";
    }
    return "unknown";
}

Command parse_command(const std::string& s) {
    for (Command c : {Command::cmi_bench, Command::fairness, Command::oracle_check, Command::gradcheck})
        if (s == to_string(c)) return c;
    throw std::invalid_argument("unknown command '" + s + "'");
}

bool ExperimentConfig::has_section(const std::string& name) const {
    return std::find(sections.begin(), sections.end(), name) != sections.end();
}

void ExperimentConfig::apply_seeds(std::vector<std::uint64_t> s) {
    seeds = std::move(s);
    sweep.seeds = seeds;
}

std::size_t ExperimentConfig::fairness_iterations() const {
    if (fairness.iterations_set) return fairness.run.iterations;
    return fairness.dataset == "german" ? 10000 : 2000;
}

ExperimentConfig parse_config(std::string_view text) {
    ExperimentConfig cfg;
    const auto& g = grammar();
    const SectionKeys* section = nullptr;
    std::string section_name;
    std::set<std::string> seen_sections;
    std::map<std::string, std::size_t> seen_keys;  // "section.key" -> line

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t nl = text.find('\n', pos);
        const std::string_view raw = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
        ++line_no;

        std::string line = trim(raw);
        if (line.empty() || line.front() == '#' || line.front() == ';') continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw ConfigError(line_no, "malformed section header '" + line + "'");
            section_name = trim(std::string_view(line).substr(1, line.size() - 2));
            const auto it = g.find(section_name);
            if (it == g.end())
                throw ConfigError(line_no, "unknown section [" + section_name + "] (expected run, cmi-bench or fairness)");
            if (!seen_sections.insert(section_name).second)
                throw ConfigError(line_no, "duplicate section [" + section_name + "]");
            cfg.sections.push_back(section_name);
            section = &it->second;
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ConfigError(line_no, "expected 'key = value', got '" + line + "'");
        if (!section) throw ConfigError(line_no, "key outside of any section");
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        const auto setter = section->find(key);
        if (setter == section->end())
            throw ConfigError(line_no, "unknown key '" + key + "' in [" + section_name + "]");
        const auto [prev, fresh] = seen_keys.emplace(section_name + "." + key, line_no);
        if (!fresh)
            throw ConfigError(line_no, "duplicate key '" + key + "' in [" + section_name + "] (first set on line " +
                                           std::to_string(prev->second) + ")");
        try {
            setter->second(cfg, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(line_no, key + ": " + e.what());
        }
    }

    cfg.apply_seeds(cfg.seeds);
    try {
        cfg.sweep.base.validate();
        for (Objective o : cfg.sweep.objectives) {
            EstimatorConfig probe = cfg.sweep.base;
            probe.objective = o;
            probe.validate();
        }
        FairnessRunConfig fr = cfg.fairness.run;
        fr.iterations = cfg.fairness_iterations();
        fr.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, e.what());
    }
    if (cfg.seeds.empty()) throw ConfigError(0, "at least one seed is required");
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw ConfigError(0, "cannot open " + file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

std::string echo_config(const ExperimentConfig& cfg) {
    const EstimatorConfig& b = cfg.sweep.base;
    const FairnessRunConfig& f = cfg.fairness.run;
    const std::vector<std::size_t> values = cfg.sweep.values.empty() ? sweep_grid(cfg.sweep.axis) : cfg.sweep.values;
    std::ostringstream os;
    os << "[run]\n"
       << "output = " << cfg.output_dir.string() << "\n"
       << "seeds = " << join(cfg.seeds) << "\n\n";
    os << "[cmi-bench]\n"
       << "variant = " << to_string(cfg.sweep.variant) << "\n"
       << "axis = " << to_string(cfg.sweep.axis) << "\n"
       << "values = " << join(values) << "\n"
       << "n = " << cfg.sweep.fixed_n << "\n"
       << "d_z = " << cfg.sweep.fixed_d_z << "\n"
       << "sigma_eps_sq = " << num(cfg.sweep.sigma_eps_sq) << "\n"
       << "objectives = " << join_objectives(cfg.sweep.objectives) << "\n"
       << "critic = " << to_string(b.critic) << "\n"
       << "similarity = " << to_string(b.similarity) << "\n"
       << "hidden = " << b.hidden << "\n"
       << "out = " << b.out << "\n"
       << "depth = " << b.depth << "\n"
       << "tau = " << num(b.tau) << "\n"
       << "clusters = " << b.clusters << "\n"
       << "batch = " << b.batch << "\n"
       << "epochs = " << b.epochs << "\n"
       << "keys_per_step = " << b.keys_per_step << "\n"
       << "lr = " << num(b.adam.lr) << "\n"
       << "beta1 = " << num(b.adam.beta1) << "\n"
       << "beta2 = " << num(b.adam.beta2) << "\n\n";
    os << "[fairness]\n"
       << "dataset = " << cfg.fairness.dataset << "\n"
       << "objectives = " << join_objectives(cfg.fairness.objectives) << "\n"
       << "epsilon = " << num(f.epsilon) << "\n"
       << "lambda_init = " << num(f.lambda_init) << "\n"
       << "lambda_min = " << num(f.lambda_min) << "\n"
       << "lambda_max = " << num(f.lambda_max) << "\n"
       << "dual_rate = " << num(f.dual_rate) << "\n"
       << "hidden = " << f.hidden << "\n"
       << "rep_width = " << f.rep_width << "\n"
       << "critic_hidden = " << f.critic_hidden << "\n"
       << "critic_out = " << f.critic_out << "\n"
       << "tau = " << num(f.tau) << "\n"
       << "batch = " << f.batch << "\n"
       << "iterations = " << cfg.fairness_iterations() << "\n"
       << "lr = " << num(f.adam.lr) << "\n"
       << "beta1 = " << num(f.adam.beta1) << "\n"
       << "beta2 = " << num(f.adam.beta2) << "\n"
       << "lr_decay = " << num(f.lr_decay) << "\n"
       << "decay_every = " << f.decay_every << "\n"
       << "probe_steps = " << f.probe_steps << "\n"
       << "head_iterations = " << f.head_iterations << "\n"
       << "synthetic_n = " << cfg.fairness.synthetic.n << "\n";
    return os.str();
}

std::optional<std::uint64_t> seed_override_from_env() {
    const char* v = std::getenv("COND_MI_SEED");
    if (!v) return std::nullopt;
    try {
        return to_u64(trim(v));
    } catch (const std::invalid_argument& e) {
        throw ConfigError(0, std::string("COND_MI_SEED: ") + e.what());
    }
}

const char* version_string() {
#ifdef COND_MI_VERSION
    return COND_MI_VERSION;
#else
    return "unknown";
#endif
}

}  // namespace cmi
