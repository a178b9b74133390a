#include "doctest.h"

#include <cstdlib>
#include <filesystem>
#include <string>

#include "cmi/config.hpp"

using namespace cmi;

namespace {

std::size_t error_line(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.line();
    }
    FAIL("expected a ConfigError for:\n" << text);
    return 0;
}

std::string error_text(const std::string& text) {
    try {
        parse_config(text);
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("an empty cmi-bench section gives the reference defaults") {
    const ExperimentConfig c = parse_config("[cmi-bench]\n");
    CHECK(c.has_section("cmi-bench"));
    CHECK_FALSE(c.has_section("fairness"));
    CHECK(c.sweep.base.clusters == 10);
    CHECK(c.sweep.base.epochs == 100);
    CHECK(c.sweep.base.batch == 64);
    CHECK(c.sweep.base.hidden == 64);
    CHECK(c.sweep.base.adam.lr == 1e-4);
    CHECK(c.sweep.axis == SweepAxis::d_z);
    CHECK(c.sweep.fixed_n == 20000);
    CHECK(c.seeds == std::vector<std::uint64_t>{0, 1, 2});
    CHECK(c.sweep.seeds == c.seeds);
}

TEST_CASE("values are parsed into every section") {
    const ExperimentConfig c = parse_config(
        "# sweep over sample size\n"
        "[run]\n"
        "output = out/dir\n"
        "seeds = 4, 9\n"
        "\n"
        "[cmi-bench]\n"
        "axis = n\n"
        "values = 5000,10000\n"
        "d_z = 7\n"
        "objectives = c_infonce, difference_based\n"
        "critic = z_augmented\n"
        "similarity = cosine\n"
        "lr = 2.5e-4\n"
        "; a comment\n"
        "[fairness]\n"
        "dataset = german\n"
        "epsilon = 0.2\n"
        "objectives = infonce, weac_infonce\n");
    CHECK(c.output_dir == "out/dir");
    CHECK(c.seeds == std::vector<std::uint64_t>{4, 9});
    CHECK(c.sweep.seeds == c.seeds);
    CHECK(c.sweep.axis == SweepAxis::n);
    CHECK(c.sweep.values == std::vector<std::size_t>{5000, 10000});
    CHECK(c.sweep.fixed_d_z == 7);
    CHECK(c.sweep.objectives == std::vector<Objective>{Objective::c_infonce, Objective::difference_based});
    CHECK(c.sweep.base.critic == CriticKind::z_augmented);
    CHECK(c.sweep.base.similarity == Similarity::cosine);
    CHECK(c.sweep.base.adam.lr == 2.5e-4);
    CHECK(c.fairness.dataset == "german");
    CHECK(c.fairness.run.epsilon == 0.2);
    CHECK(c.fairness_iterations() == 10000);
    CHECK(c.fairness.objectives == std::vector<Objective>{Objective::infonce, Objective::weac_infonce});
}

TEST_CASE("dataset-dependent iteration defaults") {
    CHECK(parse_config("[fairness]\ndataset = adult\n").fairness_iterations() == 2000);
    CHECK(parse_config("[fairness]\n").fairness_iterations() == 2000);
    CHECK(parse_config("[fairness]\ndataset = german\niterations = 50\n").fairness_iterations() == 50);
}

TEST_CASE("errors name the offending line") {
    CHECK(error_line("[fairness]\nepsilon = -1\n") == 2);
    CHECK(error_line("[cmi-bench]\nbatch = 64\n\nbatch = 32\n") == 4);
    CHECK(error_text("[cmi-bench]\nbatch = 64\nbatch = 32\n").find("duplicate key 'batch'") != std::string::npos);
    CHECK(error_line("[cmi-bench]\nlearning_rate = 1\n") == 2);
    CHECK(error_text("[cmi-bench]\nlearning_rate = 1\n").find("unknown key 'learning_rate'") != std::string::npos);
    CHECK(error_line("[cmi-bench]\nepochs = ten\n") == 2);
    CHECK(error_line("[cmi-bench]\nepochs = 0\n") == 2);
    CHECK(error_line("[cmi-bench]\nlr = 1e-4x\n") == 2);
    CHECK(error_line("[cmi-bench]\ncritic = mlp\n") == 2);
    CHECK(error_line("[cmi-bench]\naxis = depth\n") == 2);
    CHECK(error_line("[cmi-bench]\nvalues = 1,,2\n") == 2);
    CHECK(error_line("[fairness]\nobjectives = difference_based\n") == 2);
    CHECK(error_line("[fairness]\ndataset = health\n") == 2);
    CHECK(error_line("\n[bench]\n") == 2);
    CHECK(error_line("[run]\n[run]\n") == 2);
    CHECK(error_line("seeds = 1\n") == 1);
    CHECK(error_line("[run]\nseeds\n") == 2);
    CHECK(error_line("[run]\nseeds = -1\n") == 2);
    CHECK(error_line("[cmi-bench\n") == 1);
}

TEST_CASE("cross-field validation is reported without a line") {
    CHECK(error_line("[fairness]\nlambda_init = 500\n") == 0);
    CHECK(error_line("[cmi-bench]\ncritic = separable\n") == 0);
}

TEST_CASE("the echo is canonical and parses back to the same settings") {
    const ExperimentConfig c = parse_config("[run]\nseeds = 3\n[cmi-bench]\nepochs = 7\ntau = 0.3\n[fairness]\nepsilon = 0.25\n");
    const std::string echo = echo_config(c);
    const ExperimentConfig back = parse_config(echo);
    CHECK(echo_config(back) == echo);
    CHECK(back.sweep.base.epochs == 7);
    CHECK(back.sweep.base.tau == 0.3);
    CHECK(back.fairness.run.epsilon == 0.25);
    CHECK(back.seeds == std::vector<std::uint64_t>{3});
}

TEST_CASE("seed override from the environment") {
    ::unsetenv("COND_MI_SEED");
    CHECK_FALSE(seed_override_from_env().has_value());
    ::setenv("COND_MI_SEED", "17", 1);
    CHECK(seed_override_from_env() == std::optional<std::uint64_t>{17});
    ::setenv("COND_MI_SEED", "abc", 1);
    CHECK_THROWS_AS(seed_override_from_env(), ConfigError);
    ::unsetenv("COND_MI_SEED");
}

TEST_CASE("command names round-trip") {
    for (Command c : {Command::cmi_bench, Command::fairness, Command::oracle_check, Command::gradcheck})
        CHECK(parse_command(to_string(c)) == c);
    CHECK_THROWS_AS(parse_command("train"), std::invalid_argument);
}

#ifdef COND_MI_CONFIG_DIR
TEST_CASE("every shipped config parses") {
    std::size_t count = 0;
    for (const auto& entry : std::filesystem::directory_iterator(COND_MI_CONFIG_DIR)) {
        if (entry.path().extension() != ".ini") continue;
        CAPTURE(entry.path().string());
        CHECK_NOTHROW(load_config(entry.path()));
        ++count;
    }
    CHECK(count >= 5);
}
#endif
