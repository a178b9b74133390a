#include "cmi/discrete_oracle.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cmi {

DiscretePMF::DiscretePMF(std::size_t nx, std::size_t ny, std::size_t nz, std::vector<double> table)
    : nx_(nx), ny_(ny), nz_(nz), p_(std::move(table)) {
    if (nx == 0 || ny == 0 || nz == 0 || nx > kMaxAlphabet || ny > kMaxAlphabet || nz > kMaxAlphabet)
        throw std::invalid_argument("DiscretePMF: alphabet sizes must be in [1, 16]");
    if (p_.size() != nx * ny * nz) throw std::invalid_argument("DiscretePMF: table size mismatch");
    double total = 0.0;
    for (double v : p_) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw NormalizationError("DiscretePMF: negative or non-finite entry");
        total += v;
    }
    if (std::abs(total - 1.0) > 1e-12)
        throw NormalizationError("DiscretePMF: entries sum to " + std::to_string(total));
}

std::vector<double> DiscretePMF::marginal_x() const {
    std::vector<double> m(nx_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
        for (std::size_t y = 0; y < ny_; ++y)
            for (std::size_t z = 0; z < nz_; ++z) m[x] += (*this)(x, y, z);
    return m;
}

std::vector<double> DiscretePMF::marginal_y() const {
    std::vector<double> m(ny_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
        for (std::size_t y = 0; y < ny_; ++y)
            for (std::size_t z = 0; z < nz_; ++z) m[y] += (*this)(x, y, z);
    return m;
}

std::vector<double> DiscretePMF::marginal_z() const {
    std::vector<double> m(nz_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
        for (std::size_t y = 0; y < ny_; ++y)
            for (std::size_t z = 0; z < nz_; ++z) m[z] += (*this)(x, y, z);
    return m;
}

std::vector<double> DiscretePMF::marginal_xy() const {
    std::vector<double> m(nx_ * ny_, 0.0);
    for (std::size_t x = 0; x < nx_; ++x)
        for (std::size_t y = 0; y < ny_; ++y)
            for (std::size_t z = 0; z < nz_; ++z) m[x * ny_ + y] += (*this)(x, y, z);
    return m;
}

namespace {

std::vector<double> dirichlet_flat(std::size_t k, Rng& rng) {
    std::vector<double> v(k);
    double total = 0.0;
    for (double& e : v) {
        do {
            e = rng.exponential();
        } while (e <= 0.0);
        total += e;
    }
    for (double& e : v) e /= total;
    return v;
}

// Renormalise so the table passes the 1e-12 sum check despite rounding.
std::vector<double> renormalised(std::vector<double> t) {
    double total = 0.0;
    for (double v : t) total += v;
    for (double& v : t) v /= total;
    return t;
}

}  // namespace

DiscretePMF DiscretePMF::random(std::size_t nx, std::size_t ny, std::size_t nz, Rng& rng) {
    return DiscretePMF(nx, ny, nz, dirichlet_flat(nx * ny * nz, rng));
}

DiscretePMF DiscretePMF::random_conditionally_independent(std::size_t nx, std::size_t ny,
                                                          std::size_t nz, Rng& rng) {
    const auto pz = dirichlet_flat(nz, rng);
    std::vector<double> t(nx * ny * nz);
    for (std::size_t z = 0; z < nz; ++z) {
        const auto px = dirichlet_flat(nx, rng);
        const auto py = dirichlet_flat(ny, rng);
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t y = 0; y < ny; ++y) t[(x * ny + y) * nz + z] = pz[z] * px[x] * py[y];
    }
    return DiscretePMF(nx, ny, nz, renormalised(std::move(t)));
}

double kl_divergence(const std::vector<double>& p, const std::vector<double>& q) {
    if (p.size() != q.size()) throw std::invalid_argument("kl_divergence: size mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        if (p[i] == 0.0) continue;
        if (q[i] == 0.0) throw NormalizationError("kl_divergence: p > 0 where q == 0");
        s += p[i] * std::log(p[i] / q[i]);
    }
    return s;
}

double exact_mi(const DiscretePMF& p, MIPair of) {
    const std::size_t nx = p.nx(), ny = p.ny(), nz = p.nz();
    const auto px = p.marginal_x();
    const auto py = p.marginal_y();
    const auto pz = p.marginal_z();
    double s = 0.0;
    switch (of) {
        case MIPair::XY: {
            const auto pxy = p.marginal_xy();
            for (std::size_t x = 0; x < nx; ++x)
                for (std::size_t y = 0; y < ny; ++y) {
                    const double j = pxy[x * ny + y];
                    if (j > 0.0) s += j * std::log(j / (px[x] * py[y]));
                }
            break;
        }
        case MIPair::XZ:
        case MIPair::YZ: {
            const bool use_x = of == MIPair::XZ;
            const std::size_t na = use_x ? nx : ny;
            std::vector<double> joint(na * nz, 0.0);
            for (std::size_t x = 0; x < nx; ++x)
                for (std::size_t y = 0; y < ny; ++y)
                    for (std::size_t z = 0; z < nz; ++z) joint[(use_x ? x : y) * nz + z] += p(x, y, z);
            const auto& pa = use_x ? px : py;
            for (std::size_t a = 0; a < na; ++a)
                for (std::size_t z = 0; z < nz; ++z) {
                    const double j = joint[a * nz + z];
                    if (j > 0.0) s += j * std::log(j / (pa[a] * pz[z]));
                }
            break;
        }
        case MIPair::X_YZ: {
            std::vector<double> pyz(ny * nz, 0.0);
            for (std::size_t x = 0; x < nx; ++x)
                for (std::size_t y = 0; y < ny; ++y)
                    for (std::size_t z = 0; z < nz; ++z) pyz[y * nz + z] += p(x, y, z);
            for (std::size_t x = 0; x < nx; ++x)
                for (std::size_t y = 0; y < ny; ++y)
                    for (std::size_t z = 0; z < nz; ++z) {
                        const double j = p(x, y, z);
                        if (j > 0.0) s += j * std::log(j / (px[x] * pyz[y * nz + z]));
                    }
            break;
        }
    }
    return std::max(s, 0.0);
}

namespace {

// Conditional tables p(x|z) and p(y|z), laid out [z][x] and [z][y].
struct Conditionals {
    std::vector<double> pz, px_z, py_z;
};

Conditionals conditionals(const DiscretePMF& p) {
    const std::size_t nx = p.nx(), ny = p.ny(), nz = p.nz();
    Conditionals c{p.marginal_z(), std::vector<double>(nz * nx, 0.0), std::vector<double>(nz * ny, 0.0)};
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t z = 0; z < nz; ++z) {
                c.px_z[z * nx + x] += p(x, y, z);
                c.py_z[z * ny + y] += p(x, y, z);
            }
    for (std::size_t z = 0; z < nz; ++z) {
        if (c.pz[z] == 0.0) continue;
        for (std::size_t x = 0; x < nx; ++x) c.px_z[z * nx + x] /= c.pz[z];
        for (std::size_t y = 0; y < ny; ++y) c.py_z[z * ny + y] /= c.pz[z];
    }
    return c;
}

// p(z) p(x|z) p(y|z) laid out like the joint table.
std::vector<double> conditional_product(const DiscretePMF& p, const Conditionals& c) {
    const std::size_t nx = p.nx(), ny = p.ny(), nz = p.nz();
    std::vector<double> q(nx * ny * nz);
    for (std::size_t x = 0; x < nx; ++x)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t z = 0; z < nz; ++z)
                q[(x * ny + y) * nz + z] = c.pz[z] * c.px_z[z * nx + x] * c.py_z[z * ny + y];
    return q;
}

}  // namespace

double exact_cmi(const DiscretePMF& p) {
    const auto c = conditionals(p);
    return std::max(kl_divergence(p.table(), conditional_product(p, c)), 0.0);
}

std::vector<double> weak_reference(const DiscretePMF& p) {
    const std::size_t nx = p.nx(), ny = p.ny(), nz = p.nz();
    const auto c = conditionals(p);
    std::vector<double> q(nx * ny, 0.0);
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t x = 0; x < nx; ++x)
            for (std::size_t y = 0; y < ny; ++y)
                q[x * ny + y] += c.pz[z] * c.px_z[z * nx + x] * c.py_z[z * ny + y];
    return q;
}

double exact_weak_cmi(const DiscretePMF& p) {
    return std::max(kl_divergence(p.marginal_xy(), weak_reference(p)), 0.0);
}

double variational_kl_bound(const std::vector<double>& p, const std::vector<double>& q,
                            const std::vector<double>& f) {
    double ep = 0.0, eq = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        ep += p[i] * f[i];
        eq += q[i] * std::exp(f[i]);
    }
    return ep - eq + 1.0;
}

VariationalCheckReport variational_kl_check(const DiscretePMF& p, std::size_t trials, Rng& rng) {
    const auto c = conditionals(p);
    const auto px = p.marginal_x();
    const auto py = p.marginal_y();
    std::vector<double> product(p.nx() * p.ny());
    for (std::size_t x = 0; x < p.nx(); ++x)
        for (std::size_t y = 0; y < p.ny(); ++y) product[x * p.ny() + y] = px[x] * py[y];

    struct Pair {
        std::vector<double> P, Q;
    };
    const std::vector<Pair> pairs = {
        {p.marginal_xy(), product},
        {p.marginal_xy(), weak_reference(p)},
        {p.table(), conditional_product(p, c)},
    };

    VariationalCheckReport report;
    for (const auto& [P, Q] : pairs) {
        const double kl = kl_divergence(P, Q);
        std::vector<double> f_star(P.size());
        for (std::size_t i = 0; i < P.size(); ++i) f_star[i] = std::log(P[i] / Q[i]);
        report.optimum_gap = std::max(report.optimum_gap, std::abs(variational_kl_bound(P, Q, f_star) - kl));

        std::vector<double> f(P.size());
        for (std::size_t t = 0; t < trials; ++t) {
            // Alternate between free random critics and perturbations of the optimum.
            const double scale = (t % 3 == 0) ? 0.1 : (t % 3 == 1 ? 1.0 : 3.0);
            const bool near_optimum = (t % 2) == 1;
            for (std::size_t i = 0; i < f.size(); ++i)
                f[i] = (near_optimum ? f_star[i] : 0.0) + scale * rng.normal() * (near_optimum ? 0.1 : 1.0);
            const double excess = variational_kl_bound(P, Q, f) - kl;
            report.max_excess = std::max(report.max_excess, excess);
            if (excess > 1e-9) ++report.violations;
            ++report.trials;
        }
    }
    return report;
}

bool OracleSuiteReport::ok() const {
    return ordering_violations == 0 && max_chain_rule_error <= 1e-10 && independence_violations == 0 &&
           critic_violations == 0 && max_optimum_gap <= 1e-9;
}

OracleSuiteReport run_oracle_suite(std::size_t trials, std::size_t critic_trials, std::uint64_t seed) {
    constexpr double kSlack = 1e-9;
    Rng rng = Rng::stream(seed, "oracle");
    OracleSuiteReport r;
    for (std::size_t t = 0; t < trials; ++t) {
        const auto p = DiscretePMF::random(2 + rng.below(4), 2 + rng.below(4), 1 + rng.below(4), rng);
        const double cmi = exact_cmi(p);
        const double weak = exact_weak_cmi(p);
        if (weak < -kSlack || weak > cmi + kSlack) ++r.ordering_violations;
        r.max_chain_rule_error =
            std::max(r.max_chain_rule_error, std::abs(cmi - (exact_mi(p, MIPair::X_YZ) - exact_mi(p, MIPair::XZ))));
        ++r.pmfs;
    }
    for (std::size_t t = 0; t < 100; ++t) {
        const auto p = DiscretePMF::random_conditionally_independent(1 + rng.below(6), 1 + rng.below(6),
                                                                     1 + rng.below(6), rng);
        if (exact_cmi(p) > kSlack || exact_weak_cmi(p) > kSlack) ++r.independence_violations;
        ++r.independence_cases;
    }
    const auto p = DiscretePMF::random(3, 3, 2, rng);
    const VariationalCheckReport v = variational_kl_check(p, critic_trials, rng);
    r.critics = v.trials;
    r.critic_violations = v.violations;
    r.max_optimum_gap = v.optimum_gap;
    return r;
}

}  // namespace cmi
