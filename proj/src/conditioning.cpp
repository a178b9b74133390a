#include "cmi/conditioning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cmi {
namespace {

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s;
}

Matrix kmeanspp_seed(const Matrix& zs, std::size_t k, Rng& rng) {
    const std::size_t n = zs.rows();
    Matrix centers(k, zs.cols());
    auto set_center = [&](std::size_t c, std::size_t row) {
        auto src = zs.row_span(row);
        std::copy(src.begin(), src.end(), centers.row_span(c).begin());
    };
    set_center(0, static_cast<std::size_t>(rng.below(n)));
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = sq_dist(zs.row_span(i), centers.row_span(0));
    for (std::size_t c = 1; c < k; ++c) {
        double total = 0.0;
        for (double v : d2) total += v;
        std::size_t chosen = 0;
        if (total > 0.0) {
            double target = rng.uniform() * total;
            chosen = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                target -= d2[i];
                if (target < 0.0) {
                    chosen = i;
                    break;
                }
            }
        } else {
            chosen = static_cast<std::size_t>(rng.below(n));
        }
        set_center(c, chosen);
        for (std::size_t i = 0; i < n; ++i)
            d2[i] = std::min(d2[i], sq_dist(zs.row_span(i), centers.row_span(c)));
    }
    return centers;
}

}  // namespace

std::size_t ClusterModel::assign(std::span<const double> z) const {
    if (z.size() != centers.cols()) throw DimensionError("ClusterModel::assign: width mismatch");
    std::size_t best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.rows(); ++c) {
        const double d = sq_dist(z, centers.row_span(c));
        if (d < best_d) {
            best_d = d;
            best = c;
        }
    }
    return best;
}

std::vector<std::size_t> ClusterModel::assign_all(const Matrix& zs) const {
    std::vector<std::size_t> out(zs.rows());
    for (std::size_t i = 0; i < zs.rows(); ++i) out[i] = assign(zs.row_span(i));
    return out;
}

double ClusterModel::inertia(const Matrix& zs) const {
    double s = 0.0;
    for (std::size_t i = 0; i < zs.rows(); ++i)
        s += sq_dist(zs.row_span(i), centers.row_span(assign(zs.row_span(i))));
    return s;
}

ClusterModel kmeans_fit(const Matrix& zs, std::size_t k, std::uint64_t seed, std::size_t max_iterations) {
    if (k == 0) throw std::invalid_argument("kmeans_fit: K must be positive");
    if (zs.rows() < k)
        throw InsufficientDataError("kmeans_fit: " + std::to_string(zs.rows()) + " rows for K=" +
                                    std::to_string(k));
    Rng rng = Rng::stream(seed, "kmeans");
    ClusterModel model;
    model.centers = kmeanspp_seed(zs, k, rng);

    const std::size_t n = zs.rows();
    const std::size_t d = zs.cols();
    std::vector<std::size_t> assignment(n, std::numeric_limits<std::size_t>::max());

    for (std::size_t iter = 0; iter < max_iterations; ++iter) {
        bool changed = false;
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t c = model.assign(zs.row_span(i));
            inertia += sq_dist(zs.row_span(i), model.centers.row_span(c));
            if (c != assignment[i]) {
                assignment[i] = c;
                changed = true;
            }
        }
        model.inertia_history.push_back(inertia);
        model.iterations = iter + 1;
        if (!changed && iter > 0) break;

        Matrix sums(k, d);
        std::vector<std::size_t> counts(k, 0);
        for (std::size_t i = 0; i < n; ++i) {
            ++counts[assignment[i]];
            auto row = zs.row_span(i);
            auto dst = sums.row_span(assignment[i]);
            for (std::size_t j = 0; j < d; ++j) dst[j] += row[j];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] == 0) continue;
            for (std::size_t j = 0; j < d; ++j)
                model.centers(c, j) = sums(c, j) / static_cast<double>(counts[c]);
        }
        // Empty-cluster repair: move the empty center onto the point farthest
        // from its assigned center, taking that point out of its old cluster.
        for (std::size_t c = 0; c < k; ++c) {
            if (counts[c] != 0) continue;
            std::size_t far = 0;
            double far_d = -1.0;
            for (std::size_t i = 0; i < n; ++i) {
                if (counts[assignment[i]] <= 1) continue;
                const double dd = sq_dist(zs.row_span(i), model.centers.row_span(assignment[i]));
                if (dd > far_d) {
                    far_d = dd;
                    far = i;
                }
            }
            auto src = zs.row_span(far);
            std::copy(src.begin(), src.end(), model.centers.row_span(c).begin());
            --counts[assignment[far]];
            assignment[far] = c;
            counts[c] = 1;
            ++model.repairs;
        }
    }
    return model;
}

std::size_t GroupedDataset::total() const {
    std::size_t s = 0;
    for (const auto& [key, rows] : groups) s += rows.size();
    return s;
}

std::vector<OutcomeKey> GroupedDataset::keys() const {
    std::vector<OutcomeKey> out;
    out.reserve(groups.size());
    for (const auto& [key, rows] : groups) out.push_back(key);
    return out;
}

const std::vector<std::size_t>& GroupedDataset::rows(OutcomeKey key) const {
    auto it = groups.find(key);
    if (it == groups.end() || it->second.empty())
        throw EmptyGroupError("no rows for outcome " + std::to_string(key));
    return it->second;
}

GroupedDataset group_by_outcome(std::span<const OutcomeKey> values) {
    GroupedDataset g;
    for (std::size_t i = 0; i < values.size(); ++i) g.groups[values[i]].push_back(i);
    return g;
}

GroupedDataset group_by_outcome(const Matrix& zs, const ClusterModel& model) {
    GroupedDataset g;
    for (std::size_t i = 0; i < zs.rows(); ++i)
        g.groups[static_cast<OutcomeKey>(model.assign(zs.row_span(i)))].push_back(i);
    return g;
}

std::size_t binary_code_width(std::size_t outcomes) {
    std::size_t bits = 0;
    while ((std::size_t{1} << bits) < outcomes) ++bits;
    return std::max<std::size_t>(bits, 8);
}

std::vector<double> binary_code(std::uint64_t id, std::size_t width) {
    std::vector<double> code(width, 0.0);
    for (std::size_t b = 0; b < width && b < 64; ++b) code[b] = static_cast<double>((id >> b) & 1u);
    return code;
}

TripleBatch make_batch(const ConditionalSource& source, std::span<const std::size_t> rows,
                       std::optional<OutcomeKey> key) {
    TripleBatch batch;
    batch.xs = gather_rows(*source.xs, rows);
    batch.ys = gather_rows(*source.ys, rows);
    if (source.zs) {
        batch.zs = gather_rows(*source.zs, rows);
    } else if (source.discrete_code && key) {
        const auto code = source.discrete_code(*key);
        Matrix z(rows.size(), code.size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            std::copy(code.begin(), code.end(), z.row_span(r).begin());
        batch.zs = std::move(z);
    }
    return batch;
}

TripleBatch sample_conditional_batch(const GroupedDataset& grouped, const ConditionalSource& source,
                                     OutcomeKey key, std::size_t n, Rng& rng, const WarningSink& warn) {
    const auto& pool = grouped.rows(key);
    std::vector<std::size_t> picked;
    picked.reserve(n);
    if (pool.size() >= n) {
        // Partial Fisher-Yates over a copy of the pool.
        std::vector<std::size_t> scratch = pool;
        for (std::size_t i = 0; i < n; ++i) {
            const auto j = i + static_cast<std::size_t>(rng.below(scratch.size() - i));
            std::swap(scratch[i], scratch[j]);
            picked.push_back(scratch[i]);
        }
    } else {
        if (warn)
            warn("outcome " + std::to_string(key) + " has " + std::to_string(pool.size()) +
                 " rows < batch " + std::to_string(n) + "; sampling with replacement");
        for (std::size_t i = 0; i < n; ++i) picked.push_back(pool[rng.below(pool.size())]);
    }
    return make_batch(source, picked, key);
}

std::vector<TripleBatch> partition_batches(const GroupedDataset& grouped,
                                           const ConditionalSource& source, std::size_t n,
                                           std::uint64_t seed) {
    std::vector<TripleBatch> out;
    Rng rng = Rng::stream(seed, "partition");
    for (const auto& [key, pool] : grouped.groups) {
        std::vector<std::size_t> order = pool;
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += n) {
            const std::size_t len = std::min(n, order.size() - start);
            if (len < 2) break;
            out.push_back(make_batch(source, std::span(order).subspan(start, len), key));
        }
    }
    return out;
}

}  // namespace cmi
