#include "cmi/fairness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <stdexcept>

#include "cmi/kernels.hpp"
#include "cmi/objectives.hpp"

namespace cmi {

namespace {

constexpr std::size_t kCodeWidth = 8;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Matrix code_matrix(std::span<const OutcomeKey> ids) {
    Matrix m(ids.size(), kCodeWidth);
    for (std::size_t r = 0; r < ids.size(); ++r) {
        if (ids[r] < 0) throw std::invalid_argument("sensitive ids must be non-negative");
        const auto code = binary_code(static_cast<std::uint64_t>(ids[r]), kCodeWidth);
        std::copy(code.begin(), code.end(), m.row_span(r).begin());
    }
    return m;
}

GroupedDataset one_group(std::vector<std::size_t> rows) {
    GroupedDataset g;
    g.groups[0] = std::move(rows);
    return g;
}

std::vector<std::size_t> iota_rows(std::size_t n) {
    std::vector<std::size_t> v(n);
    std::iota(v.begin(), v.end(), std::size_t{0});
    return v;
}

std::size_t distinct(std::span<const OutcomeKey> ids) { return std::set<OutcomeKey>(ids.begin(), ids.end()).size(); }

void standardize_with(Matrix& m, const std::vector<double>& mean, const std::vector<double>& sd) {
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) m(r, c) = (m(r, c) - mean[c]) / sd[c];
}

void column_stats(const Matrix& m, std::vector<double>& mean, std::vector<double>& sd) {
    mean.assign(m.cols(), 0.0);
    sd.assign(m.cols(), 0.0);
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) mean[c] += m(r, c);
    for (double& v : mean) v /= static_cast<double>(m.rows());
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (std::size_t c = 0; c < m.cols(); ++c) sd[c] += (m(r, c) - mean[c]) * (m(r, c) - mean[c]);
    for (double& v : sd) {
        v = std::sqrt(v / static_cast<double>(m.rows()));
        if (!(v > 1e-12)) v = 1.0;
    }
}

}  // namespace

void FairnessRunConfig::validate() const {
    if (!(epsilon > 0.0)) throw std::invalid_argument("FairnessRunConfig: epsilon must be positive");
    if (!(lambda_min > 0.0 && lambda_min < lambda_max))
        throw std::invalid_argument("FairnessRunConfig: lambda range must satisfy 0 < min < max");
    if (lambda_init < lambda_min || lambda_init > lambda_max)
        throw std::invalid_argument("FairnessRunConfig: lambda_init outside its range");
    if (objective == Objective::difference_based)
        throw std::invalid_argument("FairnessRunConfig: objective must be infonce, c_infonce or weac_infonce");
    if (batch < 2 || iterations == 0 || hidden == 0 || rep_width == 0 || critic_hidden == 0 || critic_out == 0)
        throw std::invalid_argument("FairnessRunConfig: sizes must be positive (batch >= 2)");
    if (!(tau > 0.0)) throw std::invalid_argument("FairnessRunConfig: tau must be positive");
    if (!(adam.lr > 0.0) || !(lr_decay > 0.0) || decay_every == 0)
        throw std::invalid_argument("FairnessRunConfig: learning-rate schedule must be positive");
}

Matrix FairEncoder::encode(const Matrix& features) { return net.predict(features); }

FairEncoder pretrain_fair(const TabularDataset& data, const FairnessRunConfig& cfg) {
    cfg.validate();
    const TabularDataset train = data.train();
    if (train.size() < 2) throw std::invalid_argument("pretrain_fair: training split too small");
    const std::size_t d = train.features.cols();

    Rng proj_rng = Rng::stream(cfg.seed, "projection");
    Rng init = Rng::stream(cfg.seed, "init");
    Rng sampling = Rng::stream(cfg.seed, "sampling");

    FairEncoder enc;
    enc.projection = Matrix(d, cfg.rep_width);
    for (double& v : enc.projection.data()) v = proj_rng.normal() / std::sqrt(static_cast<double>(d));
    enc.net = MLP(d, cfg.hidden, cfg.rep_width, 2, init);

    CriticOptions co;
    co.hidden = cfg.critic_hidden;
    co.out = cfg.critic_out;
    co.similarity = Similarity::cosine;
    co.tau = cfg.tau;
    co.shared_tower = true;
    Critic ssl = cfg.objective == Objective::c_infonce
                     ? Critic::z_augmented(cfg.rep_width, cfg.rep_width, kCodeWidth, co, init)
                     : Critic::separable(cfg.rep_width, cfg.rep_width, co, init);
    CriticOptions ao;
    ao.hidden = 32;
    ao.out = 16;
    ao.similarity = Similarity::dot;
    Critic adversary = Critic::separable(cfg.rep_width, kCodeWidth, ao, init);

    std::vector<Parameter*> params = enc.net.parameters();
    for (Parameter* p : ssl.parameters()) params.push_back(p);
    Adam enc_opt(params, cfg.adam);
    Adam adv_opt(adversary.parameters(), cfg.adam);

    const Matrix px = kernels::matmul(train.features, enc.projection);
    const Matrix codes = code_matrix(train.sensitive);
    const ConditionalSource src{&train.features, &px, &codes, {}};
    const GroupedDataset grouped = group_by_outcome(train.sensitive);
    const GroupedDataset everyone = one_group(iota_rows(train.size()));
    const std::vector<OutcomeKey> keys = grouped.keys();
    const bool conditional = cfg.objective != Objective::infonce;

    double lambda = cfg.lambda_init;
    for (std::size_t it = 0; it < cfg.iterations; ++it) {
        const TripleBatch b = conditional ? sample_conditional_batch(grouped, src, keys[it % keys.size()], cfg.batch, sampling)
                                          : sample_conditional_batch(everyone, src, 0, cfg.batch, sampling);
        const TripleBatch mixed = sample_conditional_batch(everyone, src, 0, cfg.batch, sampling);

        // Encoder and contrastive critic: maximise the bound, penalise the MI(Y; Z) estimate.
        enc_opt.zero_grad();
        Tape tape;
        Var rep = enc.net.forward(tape, tape.constant(b.xs));
        Var objective = contrastive_bound(tape, ssl.scores(tape, tape.constant(b.ys), rep, b.zs));
        Var mixed_rep = enc.net.forward(tape, tape.constant(mixed.xs));
        Var leak = contrastive_bound(tape, adversary.scores(tape, mixed_rep, tape.constant(*mixed.zs), std::nullopt));
        tape.backward(tape.sub(tape.scale(leak, lambda), objective));
        enc_opt.step();
        const double obj_v = tape.scalar(objective);
        const double leak_v = tape.scalar(leak);
        if (!std::isfinite(obj_v) || !std::isfinite(leak_v))
            throw std::runtime_error("pretrain_fair: objective diverged (non-finite value)");

        // Adversary: maximise its bound on the current (frozen) representations.
        adv_opt.zero_grad();
        Tape adv_tape;
        Var frozen = adv_tape.constant(enc.net.predict(mixed.xs));
        Var est = contrastive_bound(adv_tape, adversary.scores(adv_tape, frozen, adv_tape.constant(*mixed.zs), std::nullopt));
        adv_tape.backward(adv_tape.scale(est, -1.0));
        adv_opt.step();

        lambda = std::clamp(lambda * std::exp(cfg.dual_rate * (leak_v - cfg.epsilon)), cfg.lambda_min, cfg.lambda_max);
        enc.objective_history.push_back(obj_v);
        enc.constraint_history.push_back(leak_v);
        enc.lambda_history.push_back(lambda);

        if ((it + 1) % cfg.decay_every == 0) {
            enc_opt.set_lr(enc_opt.lr() * cfg.lr_decay);
            adv_opt.set_lr(adv_opt.lr() * cfg.lr_decay);
        }
    }
    return enc;
}

double estimate_mi_yz(const Matrix& reps, std::span<const OutcomeKey> sensitive, const ProbeOptions& opts) {
    if (reps.rows() != sensitive.size()) throw DimensionError("estimate_mi_yz: row count mismatch");
    if (distinct(sensitive) < 2 || reps.rows() < 8) return 0.0;
    Rng rng = Rng::stream(opts.seed, "probe");
    std::vector<std::size_t> order = iota_rows(reps.rows());
    rng.shuffle(order);
    const std::size_t half = order.size() / 2;
    const std::size_t fit_end = half - half / 4;
    const auto at = [&](std::size_t i) { return order.begin() + static_cast<std::ptrdiff_t>(i); };
    const GroupedDataset fit_rows = one_group({order.begin(), at(fit_end)});
    const GroupedDataset val_rows = one_group({at(fit_end), at(half)});
    const GroupedDataset eval_rows = one_group({at(half), order.end()});

    const Matrix codes = code_matrix(sensitive);
    const ConditionalSource src{&reps, &codes, nullptr, {}};
    CriticOptions co;
    co.hidden = opts.hidden;
    co.out = opts.out;
    co.depth = opts.depth;
    co.similarity = opts.similarity;
    co.tau = opts.tau;
    Critic critic = Critic::separable(reps.cols(), kCodeWidth, co, rng);
    AdamOptions ao;
    ao.lr = opts.lr;
    Adam opt(critic.parameters(), ao);

    const auto held_out = [&](const GroupedDataset& rows) {
        const std::size_t m = std::min(opts.batch, rows.groups.begin()->second.size());
        if (m < 2) return 0.0;
        const auto batches = partition_batches(rows, src, m, opts.seed);
        double total = 0.0;
        for (const auto& b : batches) total += infonce(b, critic);
        return batches.empty() ? 0.0 : total / static_cast<double>(batches.size());
    };
    const auto snapshot = [&] {
        std::vector<Matrix> values;
        for (Parameter* p : critic.parameters()) values.push_back(p->value);
        return values;
    };

    // Early stopping on the validation rows guards against memorising small splits.
    const std::size_t n = std::min(opts.batch, fit_end);
    std::vector<Matrix> best = snapshot();
    double best_val = held_out(val_rows);
    for (std::size_t step = 0; step < opts.steps; ++step) {
        const TripleBatch b = sample_conditional_batch(fit_rows, src, 0, n, rng);
        opt.zero_grad();
        Tape tape;
        Var v = infonce_value(tape, b, critic);
        tape.backward(tape.scale(v, -1.0));
        opt.step();
        if ((step + 1) % opts.check_every == 0 || step + 1 == opts.steps) {
            const double val = held_out(val_rows);
            if (val > best_val) {
                best_val = val;
                best = snapshot();
            }
        }
    }
    const std::vector<Parameter*> params = critic.parameters();
    for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = best[i];
    return held_out(eval_rows);
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
    if (scores.size() != labels.size()) throw DimensionError("roc_auc: size mismatch");
    std::vector<std::size_t> idx = iota_rows(scores.size());
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
    double positive_rank_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t i = 0; i < idx.size();) {
        std::size_t j = i;
        while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
        const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
        for (std::size_t k = i; k < j; ++k)
            if (labels[idx[k]] == 1) {
                positive_rank_sum += avg_rank;
                ++positives;
            }
        i = j;
    }
    const std::size_t negatives = scores.size() - positives;
    if (positives == 0 || negatives == 0) return kNaN;
    const double p = static_cast<double>(positives);
    return (positive_rank_sum - p * (p + 1.0) / 2.0) / (p * static_cast<double>(negatives));
}

double demographic_parity_distance(std::span<const int> predictions, std::span<const OutcomeKey> sensitive) {
    if (predictions.size() != sensitive.size()) throw DimensionError("demographic_parity_distance: size mismatch");
    const std::set<OutcomeKey> groups(sensitive.begin(), sensitive.end());
    if (groups.size() != 2) return kNaN;
    const OutcomeKey a = *groups.begin();
    double pos[2] = {0.0, 0.0}, count[2] = {0.0, 0.0};
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        const int g = sensitive[i] == a ? 0 : 1;
        count[g] += 1.0;
        pos[g] += predictions[i] == 1 ? 1.0 : 0.0;
    }
    return std::abs(pos[0] / count[0] - pos[1] / count[1]);
}

void LogisticRegression::fit(const Matrix& xs, std::span<const int> labels, std::size_t iterations, double lr) {
    if (xs.rows() != labels.size() || xs.rows() == 0) throw DimensionError("LogisticRegression::fit: bad shapes");
    Parameter w(Matrix(xs.cols(), 1));
    Parameter b(Matrix(1, 1));
    AdamOptions o;
    o.lr = lr;
    o.beta1 = 0.9;
    o.beta2 = 0.999;
    Adam opt({&w, &b}, o);
    const double inv_n = 1.0 / static_cast<double>(xs.rows());
    for (std::size_t it = 0; it < iterations; ++it) {
        opt.zero_grad();
        const Matrix logits = kernels::matmul(xs, w.value);
        Matrix residual(xs.rows(), 1);
        for (std::size_t r = 0; r < xs.rows(); ++r) {
            const double p = 1.0 / (1.0 + std::exp(-(logits(r, 0) + b.value(0, 0))));
            residual(r, 0) = (p - labels[r]) * inv_n;
            b.grad(0, 0) += residual(r, 0);
        }
        w.grad = kernels::matmul_tn(xs, residual);
        opt.step();
    }
    weight = w.value;
    bias = b.value(0, 0);
}

std::vector<double> LogisticRegression::predict_proba(const Matrix& xs) const {
    const Matrix logits = kernels::matmul(xs, weight);
    std::vector<double> p(xs.rows());
    for (std::size_t r = 0; r < xs.rows(); ++r) p[r] = 1.0 / (1.0 + std::exp(-(logits(r, 0) + bias)));
    return p;
}

FairnessReport evaluate_downstream(FairEncoder& encoder, const TabularDataset& data, const FairnessRunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    const TabularDataset train = data.train();
    const TabularDataset test = data.test();
    if (test.size() == 0) throw std::invalid_argument("evaluate_downstream: empty test split");

    Matrix r_train = encoder.encode(train.features);
    Matrix r_test = encoder.encode(test.features);

    std::vector<double> mean, sd;
    column_stats(r_train, mean, sd);
    Matrix h_train = r_train, h_test = r_test;
    standardize_with(h_train, mean, sd);
    standardize_with(h_test, mean, sd);
    LogisticRegression head;
    head.fit(h_train, train.labels, cfg.head_iterations, 0.05);
    const std::vector<double> proba = head.predict_proba(h_test);
    std::vector<int> predicted(proba.size());
    for (std::size_t i = 0; i < proba.size(); ++i) predicted[i] = proba[i] > 0.5 ? 1 : 0;

    FairnessReport rep;
    rep.objective = cfg.objective;
    rep.seed = cfg.seed;
    rep.roc_auc = roc_auc(proba, test.labels);
    rep.delta_dp = demographic_parity_distance(predicted, test.sensitive);

    ProbeOptions po;
    po.steps = cfg.probe_steps;
    po.batch = cfg.batch;
    po.seed = cfg.seed;
    rep.i_dp = estimate_mi_yz(r_test, test.sensitive, po);

    auto stratum = [&](int label, double* weight) {
        std::vector<std::size_t> rows;
        for (std::size_t i = 0; i < test.size(); ++i)
            if (test.labels[i] == label) rows.push_back(i);
        *weight = static_cast<double>(rows.size()) / static_cast<double>(test.size());
        std::vector<OutcomeKey> ids;
        for (std::size_t i : rows) ids.push_back(test.sensitive[i]);
        if (distinct(ids) < 2) return kNaN;
        return estimate_mi_yz(gather_rows(r_test, rows), ids, po);
    };
    double w0 = 0.0, w1 = 0.0;
    const double s0 = stratum(0, &w0);
    const double s1 = stratum(1, &w1);
    rep.i_eo = w0 * s0 + w1 * s1;
    rep.i_eopp = s1;
    rep.constraint_satisfied = rep.i_dp < cfg.epsilon + 0.05;
    rep.final_lambda = encoder.final_lambda();
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return rep;
}

FairnessReport run_fairness(const TabularDataset& data, const FairnessRunConfig& cfg) {
    const auto t0 = std::chrono::steady_clock::now();
    FairEncoder enc = pretrain_fair(data, cfg);
    FairnessReport r = evaluate_downstream(enc, data, cfg);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return r;
}

namespace {

std::string cell(double v, bool fixed4 = false) {
    if (std::isnan(v)) return "NA";
    std::ostringstream os;
    if (fixed4)
        os << std::fixed << std::setprecision(4) << v;
    else
        os << std::setprecision(10) << v;
    return os.str();
}

}  // namespace

void write_fairness_csv_header(std::ostream& os) {
    os << "dataset,objective,seed,delta_dp,roc_auc,i_dp,i_eo,i_eopp,constraint_satisfied,final_lambda,seconds\n";
}

void write_fairness_csv_row(std::ostream& os, const std::string& dataset, const FairnessReport& r,
                            bool include_seconds) {
    os << dataset << ',' << to_string(r.objective) << ',' << r.seed << ',' << cell(r.delta_dp) << ','
       << cell(r.roc_auc) << ',' << cell(r.i_dp) << ',' << cell(r.i_eo) << ',' << cell(r.i_eopp) << ','
       << (r.constraint_satisfied ? "true" : "false") << ',' << cell(r.final_lambda) << ',';
    if (include_seconds) {
        std::ostringstream s;
        s << std::fixed << std::setprecision(3) << r.seconds;
        os << s.str();
    }
    os << '\n';
}

std::string format_report(const std::string& dataset, const FairnessReport& r) {
    std::ostringstream os;
    os << dataset << " / " << to_string(r.objective) << " (seed " << r.seed << ")\n";
    os << "  delta_dp  " << cell(r.delta_dp, true) << "\n";
    os << "  roc_auc   " << cell(r.roc_auc, true) << "\n";
    os << "  I_DP      " << cell(r.i_dp, true) << (r.constraint_satisfied ? "  (constraint met)" : "  (constraint violated)")
       << "\n";
    os << "  I_EO      " << cell(r.i_eo, true) << "\n";
    os << "  I_EOpp    " << cell(r.i_eopp, true) << "\n";
    os << "  lambda    " << cell(r.final_lambda, true) << "\n";
    return os.str();
}

}  // namespace cmi
