#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cmi/matrix.hpp"

namespace cmi {

enum class DatasetVariant { dataset_I, dataset_II };

const char* to_string(DatasetVariant v);
DatasetVariant parse_variant(const std::string& s);

/// Linear benchmark model. X ~ N(0,1), Y = X + eps with eps ~ N(u, sigma_eps_sq):
///   dataset_I:  Z ~ U(-0.5, 0.5)^d_z, u = z_1
///   dataset_II: Z ~ N(0, 1)^d_z,      u = w^T z with ||w||_1 = 1 fixed per generator
struct LinearModelSpec {
    DatasetVariant variant = DatasetVariant::dataset_I;
    std::size_t d_z = 20;
    std::size_t n = 20000;
    double sigma_eps_sq = 0.1;
    std::vector<double> w;  // dataset_II only
    std::uint64_t seed = 0;

    /// Fills `w` (dataset_II) from N(0, I) then L1-normalises it; validates.
    static LinearModelSpec make(DatasetVariant variant, std::size_t d_z, std::size_t n,
                                std::uint64_t seed, double sigma_eps_sq = 0.1);
    void validate() const;
};

struct SyntheticDataset {
    Matrix xs;  // n x 1
    Matrix ys;  // n x 1
    Matrix zs;  // n x d_z
    LinearModelSpec spec;

    std::size_t size() const { return xs.rows(); }
    /// First two-thirds (floor) of the rows.
    std::size_t train_size() const { return (2 * size()) / 3; }
    SyntheticDataset slice(std::size_t begin, std::size_t end) const;
    SyntheticDataset train() const { return slice(0, train_size()); }
    SyntheticDataset test() const { return slice(train_size(), size()); }
};

SyntheticDataset generate(const LinearModelSpec& spec);

/// MI(X;Y|Z) in nats: 0.5 ln(1 + Var(X) / sigma_eps_sq), Var(X) = 1.
double true_cmi(const LinearModelSpec& spec);

enum class MarginalMI { xy, xz, x_yz };
double true_marginal_mi(const LinearModelSpec& spec, MarginalMI which);

/// CSV with header x,y,z_1..z_d.
void write_csv(std::ostream& os, const SyntheticDataset& data);

}  // namespace cmi
