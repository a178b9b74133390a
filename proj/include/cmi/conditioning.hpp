#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cmi/critic.hpp"
#include "cmi/rng.hpp"

namespace cmi {

class InsufficientDataError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

class EmptyGroupError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// K-means partition of continuous conditioning rows; assignment is to the
/// nearest center in Euclidean distance (lowest index on ties).
struct ClusterModel {
    Matrix centers;  // K x d_z
    std::vector<double> inertia_history;
    std::size_t iterations = 0;
    std::size_t repairs = 0;

    std::size_t k() const { return centers.rows(); }
    std::size_t assign(std::span<const double> z) const;
    std::vector<std::size_t> assign_all(const Matrix& zs) const;
    double inertia(const Matrix& zs) const;
};

/// Lloyd's algorithm with k-means++ seeding. Stops when assignments are stable
/// or after `max_iterations`. An empty cluster is reseeded at the point farthest
/// from its current center.
ClusterModel kmeans_fit(const Matrix& zs, std::size_t k, std::uint64_t seed,
                        std::size_t max_iterations = 100);

using OutcomeKey = std::int64_t;

/// Partition of row indices by conditioning outcome.
struct GroupedDataset {
    std::map<OutcomeKey, std::vector<std::size_t>> groups;

    std::size_t total() const;
    std::vector<OutcomeKey> keys() const;
    const std::vector<std::size_t>& rows(OutcomeKey key) const;
};

/// Discrete outcomes: keys are the raw values.
GroupedDataset group_by_outcome(std::span<const OutcomeKey> values);
/// Continuous outcomes: keys are cluster ids under `model`.
GroupedDataset group_by_outcome(const Matrix& zs, const ClusterModel& model);

/// Binary expansion of a discrete id, least significant bit first.
/// Width is ceil(log2(outcomes)) with a floor of 8.
std::size_t binary_code_width(std::size_t outcomes);
std::vector<double> binary_code(std::uint64_t id, std::size_t width);

/// Source rows a batch is drawn from. `zs` holds per-row conditioning vectors;
/// when absent, `discrete_code` (if set) is attached as a shared z.
struct ConditionalSource {
    const Matrix* xs = nullptr;
    const Matrix* ys = nullptr;
    const Matrix* zs = nullptr;
    std::function<std::vector<double>(OutcomeKey)> discrete_code;
};

/// Called once per outcome whose pool is smaller than the requested batch.
using WarningSink = std::function<void(const std::string&)>;

/// n aligned rows from one outcome's pool. Sampling is without replacement when
/// the pool holds at least n rows, with replacement otherwise (with a warning).
TripleBatch sample_conditional_batch(const GroupedDataset& grouped, const ConditionalSource& source,
                                     OutcomeKey key, std::size_t n, Rng& rng,
                                     const WarningSink& warn = {});

/// Deterministic partition of every group into batches of at most n rows
/// (trailing batches of fewer than 2 rows are dropped). Used for held-out evaluation.
std::vector<TripleBatch> partition_batches(const GroupedDataset& grouped,
                                           const ConditionalSource& source, std::size_t n,
                                           std::uint64_t seed);

/// Builds a batch from explicit row indices.
TripleBatch make_batch(const ConditionalSource& source, std::span<const std::size_t> rows,
                       std::optional<OutcomeKey> key);

}  // namespace cmi
