#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "cmi/estimators.hpp"
#include "cmi/tabular.hpp"

namespace cmi {

struct FairnessRunConfig {
    Objective objective = Objective::c_infonce;  // infonce, c_infonce or weac_infonce
    double epsilon = 0.1;
    double lambda_init = 1.0;
    double lambda_min = 0.01;
    double lambda_max = 100.0;
    double dual_rate = 0.05;
    std::size_t hidden = 64;
    std::size_t rep_width = 30;
    std::size_t critic_hidden = 64;
    std::size_t critic_out = 32;
    double tau = 0.2;
    std::size_t batch = 64;
    std::size_t iterations = 2000;
    AdamOptions adam{1e-3, 0.5, 0.9, 1e-8};
    double lr_decay = 0.98;
    std::size_t decay_every = 1000;
    /// Steps for the fresh critics behind I_DP / I_EO / I_EOpp.
    std::size_t probe_steps = 1000;
    std::size_t head_iterations = 300;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Frozen input projection plus trained encoder.
struct FairEncoder {
    Matrix projection;  // d x rep_width, fixed
    MLP net;
    std::vector<double> lambda_history;
    std::vector<double> objective_history;   // contrastive term per iteration
    std::vector<double> constraint_history;  // adversarial MI(Y; Z) estimate per iteration

    Matrix encode(const Matrix& features);
    double final_lambda() const { return lambda_history.empty() ? 0.0 : lambda_history.back(); }
};

/// Maximises the chosen contrastive bound between the projected input and its
/// representation, minus lambda * (MI(Y; Z) estimate - epsilon), with lambda
/// updated by projected multiplicative dual ascent. Uses the training split.
FairEncoder pretrain_fair(const TabularDataset& data, const FairnessRunConfig& cfg);

struct ProbeOptions {
    std::size_t steps = 1000;
    std::size_t batch = 64;
    std::size_t hidden = 32;
    std::size_t out = 16;
    std::size_t depth = 2;
    Similarity similarity = Similarity::dot;
    double tau = 1.0;
    double lr = 1e-3;
    std::size_t check_every = 50;  // validation interval for early stopping
    std::uint64_t seed = 0;
};

/// InfoNCE estimate of MI(representation; sensitive id) from a fresh critic
/// trained on one half of the rows (a quarter of that half is held back for
/// early stopping) and evaluated on the other half. Returns 0 when fewer than
/// two groups are present.
double estimate_mi_yz(const Matrix& reps, std::span<const OutcomeKey> sensitive, const ProbeOptions& opts);

/// Area under the ROC curve by the rank statistic (ties get average ranks).
double roc_auc(std::span<const double> scores, std::span<const int> labels);

/// |P(yhat = 1 | z = a) - P(yhat = 1 | z = b)| for exactly two groups; NaN otherwise.
double demographic_parity_distance(std::span<const int> predictions, std::span<const OutcomeKey> sensitive);

struct LogisticRegression {
    Matrix weight;  // d x 1
    double bias = 0.0;

    void fit(const Matrix& xs, std::span<const int> labels, std::size_t iterations, double lr);
    std::vector<double> predict_proba(const Matrix& xs) const;
};

struct FairnessReport {
    Objective objective = Objective::c_infonce;
    std::uint64_t seed = 0;
    double delta_dp = 0.0;  // NaN when the sensitive attribute is not binary
    double roc_auc = 0.0;
    double i_dp = 0.0;
    double i_eo = 0.0;      // NaN when a label stratum has fewer than two groups
    double i_eopp = 0.0;    // NaN likewise
    bool constraint_satisfied = false;  // i_dp < epsilon + 0.05
    double final_lambda = 0.0;
    double seconds = 0.0;
};

FairnessReport evaluate_downstream(FairEncoder& encoder, const TabularDataset& data, const FairnessRunConfig& cfg);

/// pretrain_fair followed by evaluate_downstream.
FairnessReport run_fairness(const TabularDataset& data, const FairnessRunConfig& cfg);

void write_fairness_csv_header(std::ostream& os);
void write_fairness_csv_row(std::ostream& os, const std::string& dataset, const FairnessReport& r,
                            bool include_seconds = true);
std::string format_report(const std::string& dataset, const FairnessReport& r);

}  // namespace cmi
