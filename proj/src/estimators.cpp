#include "cmi/estimators.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <set>
#include <stdexcept>

#include "cmi/conditioning.hpp"
#include "cmi/objectives.hpp"

namespace cmi {

const char* to_string(Objective o) {
    switch (o) {
        case Objective::infonce: return "infonce";
        case Objective::c_infonce: return "c_infonce";
        case Objective::weac_infonce: return "weac_infonce";
        case Objective::difference_based: return "difference_based";
    }
    return "unknown";
}

Objective parse_objective(const std::string& s) {
    for (Objective o : {Objective::infonce, Objective::c_infonce, Objective::weac_infonce,
                        Objective::difference_based})
        if (s == to_string(o)) return o;
    throw std::invalid_argument("unknown objective '" + s + "'");
}

const char* to_string(SweepAxis a) { return a == SweepAxis::n ? "n" : "d_z"; }

SweepAxis parse_axis(const std::string& s) {
    if (s == "n") return SweepAxis::n;
    if (s == "d_z") return SweepAxis::d_z;
    throw std::invalid_argument("unknown sweep axis '" + s + "'");
}

std::vector<std::size_t> sweep_grid(SweepAxis axis) {
    if (axis == SweepAxis::n) return {5000, 10000, 20000, 50000};
    return {1, 10, 20, 50, 100};
}

void EstimatorConfig::validate() const {
    if (hidden == 0 || out == 0 || depth == 0) throw std::invalid_argument("EstimatorConfig: widths must be positive");
    if (batch < 2) throw std::invalid_argument("EstimatorConfig: batch must be at least 2");
    if (clusters == 0) throw std::invalid_argument("EstimatorConfig: clusters must be positive");
    if (epochs == 0) throw std::invalid_argument("EstimatorConfig: epochs must be positive");
    if (keys_per_step == 0) throw std::invalid_argument("EstimatorConfig: keys_per_step must be positive");
    if (!(tau > 0.0)) throw std::invalid_argument("EstimatorConfig: tau must be positive");
    if (!(adam.lr > 0.0)) throw std::invalid_argument("EstimatorConfig: lr must be positive");
    if (critic == CriticKind::separable && objective == Objective::c_infonce)
        throw std::invalid_argument("EstimatorConfig: c_infonce needs a z-aware critic");
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

CriticOptions critic_options(const EstimatorConfig& cfg) {
    CriticOptions o;
    o.hidden = cfg.hidden;
    o.out = cfg.out;
    o.depth = cfg.depth;
    o.similarity = cfg.similarity;
    o.tau = cfg.tau;
    return o;
}

GroupedDataset single_group(std::size_t rows) {
    GroupedDataset g;
    auto& all = g.groups[0];
    all.resize(rows);
    std::iota(all.begin(), all.end(), std::size_t{0});
    return g;
}

Var objective_value(Tape& tape, Objective objective, std::span<const TripleBatch> batches, Critic& critic) {
    if (objective == Objective::c_infonce) return c_infonce_value(tape, batches, critic);
    return weac_infonce_value(tape, batches, critic);
}

double evaluate(Objective objective, const std::vector<TripleBatch>& batches, Critic& critic) {
    if (batches.empty()) throw std::invalid_argument("evaluate: no batch with at least 2 rows");
    Tape tape;
    return tape.scalar(objective_value(tape, objective, batches, critic));
}

void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) throw std::runtime_error(std::string(what) + ": objective diverged (non-finite value)");
}

}  // namespace

EstimateSeries run_contrastive_cmi(const SyntheticDataset& data, const EstimatorConfig& cfg) {
    cfg.validate();
    if (cfg.objective == Objective::difference_based)
        throw std::invalid_argument("run_contrastive_cmi: use run_difference_based");
    const auto t0 = Clock::now();
    const SyntheticDataset train = data.train();
    const SyntheticDataset test = data.test();
    const std::size_t d_z = data.zs.cols();

    Rng init = Rng::stream(cfg.seed, "init");
    Rng sampling = Rng::stream(cfg.seed, "sampling");
    const CriticOptions co = critic_options(cfg);
    Critic critic = cfg.objective != Objective::c_infonce ? Critic::separable(1, 1, co, init)
                    : cfg.critic == CriticKind::bilinear_z ? Critic::bilinear_z(1, 1, d_z, co, init)
                                                           : Critic::z_augmented(1, 1, d_z, co, init);

    const bool conditional = cfg.objective != Objective::infonce;
    ClusterModel model;
    GroupedDataset grouped;
    if (conditional) {
        model = kmeans_fit(train.zs, cfg.clusters, cfg.seed);
        grouped = group_by_outcome(train.zs, model);
    } else {
        grouped = single_group(train.size());
    }

    EstimateSeries series;
    series.config = cfg;
    series.true_value = conditional ? true_cmi(data.spec) : true_marginal_mi(data.spec, MarginalMI::xy);
    std::set<OutcomeKey> warned;
    WarningSink warn = [&](const std::string& msg) { series.warnings.push_back(msg); };

    const ConditionalSource src{&train.xs, &train.ys, &train.zs, {}};
    const std::vector<OutcomeKey> keys = grouped.keys();
    Adam opt(critic.parameters(), cfg.adam);
    const std::size_t steps_per_epoch = (train.size() + cfg.batch - 1) / cfg.batch;
    std::size_t cursor = 0;
    std::vector<TripleBatch> batches;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        double total = 0.0;
        for (std::size_t step = 0; step < steps_per_epoch; ++step) {
            batches.clear();
            for (std::size_t k = 0; k < cfg.keys_per_step; ++k) {
                const OutcomeKey key = keys[cursor++ % keys.size()];
                const bool first = warned.insert(key).second;
                batches.push_back(sample_conditional_batch(grouped, src, key, cfg.batch, sampling,
                                                           first ? warn : WarningSink{}));
            }
            opt.zero_grad();
            Tape tape;
            Var value = objective_value(tape, cfg.objective, batches, critic);
            const double v = tape.scalar(value);
            check_finite(v, "run_contrastive_cmi");
            tape.backward(tape.scale(value, -1.0));
            opt.step();
            total += v;
        }
        series.epoch_objective.push_back(total / static_cast<double>(steps_per_epoch));
    }

    const GroupedDataset test_grouped = conditional ? group_by_outcome(test.zs, model) : single_group(test.size());
    const ConditionalSource test_src{&test.xs, &test.ys, &test.zs, {}};
    series.estimate_train = evaluate(cfg.objective, partition_batches(grouped, src, cfg.batch, cfg.seed), critic);
    series.estimate_test =
        evaluate(cfg.objective, partition_batches(test_grouped, test_src, cfg.batch, cfg.seed), critic);
    series.seconds = seconds_since(t0);
    return series;
}

EstimateSeries run_difference_based(const SyntheticDataset& data, const EstimatorConfig& cfg) {
    cfg.validate();
    const auto t0 = Clock::now();
    const SyntheticDataset train = data.train();
    const SyntheticDataset test = data.test();
    const std::size_t d_z = data.zs.cols();

    Rng init = Rng::stream(cfg.seed, "init");
    Rng sampling = Rng::stream(cfg.seed, "sampling");
    const CriticOptions co = critic_options(cfg);
    Critic joint = Critic::separable(1, 1 + d_z, co, init);
    Critic marginal = Critic::separable(1, d_z, co, init);
    Adam opt_joint(joint.parameters(), cfg.adam);
    Adam opt_marginal(marginal.parameters(), cfg.adam);

    const Matrix train_yz = hconcat(train.ys, train.zs);
    const Matrix test_yz = hconcat(test.ys, test.zs);
    const ConditionalSource joint_src{&train.xs, &train_yz, nullptr, {}};
    const ConditionalSource marginal_src{&train.xs, &train.zs, nullptr, {}};

    EstimateSeries series;
    series.config = cfg;
    series.true_value = true_cmi(data.spec);

    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto train_step = [](Critic& critic, Adam& opt, const TripleBatch& batch) {
        opt.zero_grad();
        Tape tape;
        Var value = infonce_value(tape, batch, critic);
        const double v = tape.scalar(value);
        check_finite(v, "run_difference_based");
        tape.backward(tape.scale(value, -1.0));
        opt.step();
        return v;
    };
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        sampling.shuffle(order);
        double total = 0.0;
        std::size_t steps = 0;
        for (std::size_t start = 0; start + 2 <= order.size(); start += cfg.batch) {
            const auto rows = std::span(order).subspan(start, std::min(cfg.batch, order.size() - start));
            total += train_step(joint, opt_joint, make_batch(joint_src, rows, std::nullopt));
            total -= train_step(marginal, opt_marginal, make_batch(marginal_src, rows, std::nullopt));
            ++steps;
        }
        series.epoch_objective.push_back(total / static_cast<double>(steps));
    }

    auto difference = [&](const SyntheticDataset& split, const Matrix& yz, double* a, double* b) {
        const GroupedDataset g = single_group(split.size());
        const ConditionalSource js{&split.xs, &yz, nullptr, {}};
        const ConditionalSource ms{&split.xs, &split.zs, nullptr, {}};
        *a = evaluate(Objective::infonce, partition_batches(g, js, cfg.batch, cfg.seed), joint);
        *b = evaluate(Objective::infonce, partition_batches(g, ms, cfg.batch, cfg.seed), marginal);
        return *a - *b;
    };
    double a = 0.0, b = 0.0;
    series.estimate_train = difference(train, train_yz, &a, &b);
    series.estimate_test = difference(test, test_yz, &series.component_x_yz, &series.component_x_z);
    series.seconds = seconds_since(t0);
    return series;
}

EstimateSeries run_estimator(const SyntheticDataset& data, const EstimatorConfig& cfg) {
    if (cfg.objective == Objective::difference_based) return run_difference_based(data, cfg);
    return run_contrastive_cmi(data, cfg);
}

SyntheticDataset zero_signal_control(const SyntheticDataset& data, std::uint64_t seed) {
    SyntheticDataset out = data;
    Rng rng = Rng::stream(seed, "control");
    for (double& v : out.xs.data()) v = rng.normal();
    return out;
}

std::vector<SweepRow> run_sweep(const SweepPlan& plan) {
    const std::vector<std::size_t> values = plan.values.empty() ? sweep_grid(plan.axis) : plan.values;
    std::vector<SweepRow> rows;
    for (std::size_t v : values)
        for (Objective o : plan.objectives)
            for (std::uint64_t s : plan.seeds) rows.push_back({o, plan.axis, v, s, {}});

    std::exception_ptr failure;
    const auto count = static_cast<std::ptrdiff_t>(rows.size());
#pragma omp parallel for schedule(dynamic, 1)
    for (std::ptrdiff_t i = 0; i < count; ++i) {
        SweepRow& row = rows[static_cast<std::size_t>(i)];
        try {
            const std::size_t n = plan.axis == SweepAxis::n ? row.axis_value : plan.fixed_n;
            const std::size_t d_z = plan.axis == SweepAxis::d_z ? row.axis_value : plan.fixed_d_z;
            const SyntheticDataset data =
                generate(LinearModelSpec::make(plan.variant, d_z, n, row.seed, plan.sigma_eps_sq));
            EstimatorConfig cfg = plan.base;
            cfg.objective = row.objective;
            cfg.seed = row.seed;
            row.series = run_estimator(data, cfg);
        } catch (...) {
#pragma omp critical(cmi_sweep_failure)
            if (!failure) failure = std::current_exception();
        }
    }
    if (failure) std::rethrow_exception(failure);
    return rows;
}

void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool include_seconds) {
    os << "objective,axis,axis_value,seed,estimate_train,estimate_test,true_value,seconds\n";
    const auto flags = os.flags();
    const auto precision = os.precision();
    os << std::setprecision(10);
    for (const auto& r : rows) {
        os << to_string(r.objective) << ',' << to_string(r.axis) << ',' << r.axis_value << ',' << r.seed << ','
           << r.series.estimate_train << ',' << r.series.estimate_test << ',' << r.series.true_value << ',';
        if (include_seconds) os << std::fixed << std::setprecision(3) << r.series.seconds
                                << std::defaultfloat << std::setprecision(10);
        os << '\n';
    }
    os.flags(flags);
    os.precision(precision);
}

}  // namespace cmi
