#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmi/critic.hpp"
#include "cmi/synthetic.hpp"

namespace cmi {

enum class Objective { infonce, c_infonce, weac_infonce, difference_based };

const char* to_string(Objective o);
Objective parse_objective(const std::string& s);

struct EstimatorConfig {
    Objective objective = Objective::c_infonce;
    /// Critic for c_infonce (bilinear_z or z_augmented); other objectives use separable.
    CriticKind critic = CriticKind::bilinear_z;
    Similarity similarity = Similarity::dot;
    std::size_t hidden = 64;
    std::size_t out = 32;
    std::size_t depth = 2;
    double tau = 1.0;
    std::size_t clusters = 10;
    std::size_t batch = 64;
    std::size_t epochs = 100;
    /// Outcome keys visited per optimisation step (1 = round-robin, one key per step).
    std::size_t keys_per_step = 1;
    AdamOptions adam{};
    std::uint64_t seed = 0;

    void validate() const;
};

struct EstimateSeries {
    EstimatorConfig config;
    std::vector<double> epoch_objective;  // mean training objective per epoch
    double estimate_train = 0.0;
    double estimate_test = 0.0;
    double true_value = 0.0;
    double seconds = 0.0;
    // difference_based only: held-out I(X; Y, Z) and I(X; Z) components.
    double component_x_yz = 0.0;
    double component_x_z = 0.0;
    /// Sampler notices (outcomes smaller than the batch), one per outcome.
    std::vector<std::string> warnings;
};

/// Trains a contrastive critic (infonce, c_infonce or weac_infonce) on the train
/// split and reports the objective on the held-out split.
EstimateSeries run_contrastive_cmi(const SyntheticDataset& data, const EstimatorConfig& cfg);

/// I(X; Y, Z) - I(X; Z) from two unconditional InfoNCE estimators.
EstimateSeries run_difference_based(const SyntheticDataset& data, const EstimatorConfig& cfg);

/// Dispatches on cfg.objective.
EstimateSeries run_estimator(const SyntheticDataset& data, const EstimatorConfig& cfg);

/// Same rows with x replaced by independent N(0, 1) draws, so I(X; Y | Z) = 0.
SyntheticDataset zero_signal_control(const SyntheticDataset& data, std::uint64_t seed);

enum class SweepAxis { n, d_z };

const char* to_string(SweepAxis a);
SweepAxis parse_axis(const std::string& s);
/// {5000, 10000, 20000, 50000} for n, {1, 10, 20, 50, 100} for d_z.
std::vector<std::size_t> sweep_grid(SweepAxis axis);

struct SweepPlan {
    DatasetVariant variant = DatasetVariant::dataset_I;
    SweepAxis axis = SweepAxis::d_z;
    std::vector<std::size_t> values;  // defaults to sweep_grid(axis)
    std::size_t fixed_n = 20000;
    std::size_t fixed_d_z = 20;
    double sigma_eps_sq = 0.1;
    std::vector<Objective> objectives{Objective::c_infonce, Objective::weac_infonce,
                                      Objective::difference_based};
    std::vector<std::uint64_t> seeds{0, 1, 2};
    EstimatorConfig base;
};

struct SweepRow {
    Objective objective;
    SweepAxis axis;
    std::size_t axis_value;
    std::uint64_t seed;
    EstimateSeries series;
};

/// One run per (grid value, objective, seed). Runs execute in parallel across
/// OpenMP threads; rows come back in plan order regardless of scheduling.
std::vector<SweepRow> run_sweep(const SweepPlan& plan);

/// objective,axis,axis_value,seed,estimate_train,estimate_test,true_value,seconds
void write_sweep_csv(std::ostream& os, const std::vector<SweepRow>& rows, bool include_seconds = true);

}  // namespace cmi
