#include "cmi/synthetic.hpp"

#include <cmath>
#include <ostream>
#include <stdexcept>

#include "cmi/rng.hpp"

namespace cmi {

const char* to_string(DatasetVariant v) {
    return v == DatasetVariant::dataset_I ? "dataset_I" : "dataset_II";
}

DatasetVariant parse_variant(const std::string& s) {
    if (s == "dataset_I" || s == "I" || s == "1") return DatasetVariant::dataset_I;
    if (s == "dataset_II" || s == "II" || s == "2") return DatasetVariant::dataset_II;
    throw std::invalid_argument("unknown dataset variant '" + s + "'");
}

LinearModelSpec LinearModelSpec::make(DatasetVariant variant, std::size_t d_z, std::size_t n,
                                      std::uint64_t seed, double sigma_eps_sq) {
    LinearModelSpec spec;
    spec.variant = variant;
    spec.d_z = d_z;
    spec.n = n;
    spec.seed = seed;
    spec.sigma_eps_sq = sigma_eps_sq;
    if (variant == DatasetVariant::dataset_II) {
        Rng rng = Rng::stream(seed, "w");
        spec.w.resize(d_z);
        double l1 = 0.0;
        for (double& v : spec.w) {
            v = rng.normal();
            l1 += std::abs(v);
        }
        for (double& v : spec.w) v /= l1;
    }
    spec.validate();
    return spec;
}

void LinearModelSpec::validate() const {
    if (!(sigma_eps_sq > 0.0)) throw std::invalid_argument("LinearModelSpec: sigma_eps_sq must be > 0");
    if (d_z < 1) throw std::invalid_argument("LinearModelSpec: d_z must be >= 1");
    if (variant == DatasetVariant::dataset_II) {
        if (w.size() != d_z) throw std::invalid_argument("LinearModelSpec: w must have d_z entries");
        double l1 = 0.0;
        for (double v : w) l1 += std::abs(v);
        if (std::abs(l1 - 1.0) > 1e-12) throw std::invalid_argument("LinearModelSpec: ||w||_1 != 1");
    }
}

SyntheticDataset SyntheticDataset::slice(std::size_t begin, std::size_t end) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = begin; i < end; ++i) idx.push_back(i);
    SyntheticDataset out;
    out.xs = gather_rows(xs, idx);
    out.ys = gather_rows(ys, idx);
    out.zs = gather_rows(zs, idx);
    out.spec = spec;
    out.spec.n = idx.size();
    return out;
}

SyntheticDataset generate(const LinearModelSpec& spec) {
    spec.validate();
    Rng rng = Rng::stream(spec.seed, "data");
    const double sigma = std::sqrt(spec.sigma_eps_sq);
    SyntheticDataset d;
    d.spec = spec;
    d.xs = Matrix(spec.n, 1);
    d.ys = Matrix(spec.n, 1);
    d.zs = Matrix(spec.n, spec.d_z);
    for (std::size_t i = 0; i < spec.n; ++i) {
        const double x = rng.normal();
        double u = 0.0;
        for (std::size_t j = 0; j < spec.d_z; ++j) {
            const double z = spec.variant == DatasetVariant::dataset_I ? rng.uniform(-0.5, 0.5) : rng.normal();
            d.zs(i, j) = z;
            u += spec.variant == DatasetVariant::dataset_I ? (j == 0 ? z : 0.0) : spec.w[j] * z;
        }
        d.xs(i, 0) = x;
        d.ys(i, 0) = x + rng.normal(u, sigma);
    }
    return d;
}

double true_cmi(const LinearModelSpec& spec) {
    spec.validate();
    return 0.5 * std::log1p(1.0 / spec.sigma_eps_sq);
}

double true_marginal_mi(const LinearModelSpec& spec, MarginalMI which) {
    spec.validate();
    switch (which) {
        case MarginalMI::xz: return 0.0;
        case MarginalMI::x_yz: return true_cmi(spec);
        case MarginalMI::xy: {
            double mean_var = 1.0 / 12.0;
            if (spec.variant == DatasetVariant::dataset_II) {
                mean_var = 0.0;
                for (double v : spec.w) mean_var += v * v;
            }
            return 0.5 * std::log1p(1.0 / (spec.sigma_eps_sq + mean_var));
        }
    }
    throw std::logic_error("true_marginal_mi: unknown quantity");
}

void write_csv(std::ostream& os, const SyntheticDataset& data) {
    os << "x,y";
    for (std::size_t j = 0; j < data.zs.cols(); ++j) os << ",z_" << (j + 1);
    os << '\n';
    os.precision(17);
    for (std::size_t i = 0; i < data.size(); ++i) {
        os << data.xs(i, 0) << ',' << data.ys(i, 0);
        for (std::size_t j = 0; j < data.zs.cols(); ++j) os << ',' << data.zs(i, j);
        os << '\n';
    }
}

}  // namespace cmi
