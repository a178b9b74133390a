#include "doctest.h"

#include <cmath>
#include <numeric>

#include "cmi/discrete_oracle.hpp"

using namespace cmi;
using doctest::Approx;

namespace {

double entropy(const std::vector<double>& p) {
    double h = 0.0;
    for (double v : p)
        if (v > 0.0) h -= v * std::log(v);
    return h;
}

// Entropy-based reference, summed in z-major order over a different layout.
struct Entropies {
    double x, y, z, xz, yz, xyz;
};

Entropies entropies(const DiscretePMF& p) {
    const std::size_t nx = p.nx(), ny = p.ny(), nz = p.nz();
    std::vector<double> px(nx, 0.0), py(ny, 0.0), pz(nz, 0.0), pxz(nx * nz, 0.0), pyz(ny * nz, 0.0), pxyz;
    for (std::size_t z = 0; z < nz; ++z)
        for (std::size_t y = 0; y < ny; ++y)
            for (std::size_t x = 0; x < nx; ++x) {
                const double v = p(x, y, z);
                px[x] += v;
                py[y] += v;
                pz[z] += v;
                pxz[z * nx + x] += v;
                pyz[z * ny + y] += v;
                pxyz.push_back(v);
            }
    return {entropy(px), entropy(py), entropy(pz), entropy(pxz), entropy(pyz), entropy(pxyz)};
}

struct Cell {
    std::size_t x, y, z;
    double p;
};

DiscretePMF from_cells(std::size_t nx, std::size_t ny, std::size_t nz, std::initializer_list<Cell> cells) {
    std::vector<double> t(nx * ny * nz, 0.0);
    for (auto [x, y, z, v] : cells) t[(x * ny + y) * nz + z] = v;
    return DiscretePMF(nx, ny, nz, t);
}

DiscretePMF relabeled(const DiscretePMF& p, Rng& rng) {
    std::vector<std::size_t> px(p.nx()), py(p.ny()), pz(p.nz());
    std::iota(px.begin(), px.end(), 0);
    std::iota(py.begin(), py.end(), 0);
    std::iota(pz.begin(), pz.end(), 0);
    rng.shuffle(px);
    rng.shuffle(py);
    rng.shuffle(pz);
    std::vector<double> t(p.table().size());
    for (std::size_t x = 0; x < p.nx(); ++x)
        for (std::size_t y = 0; y < p.ny(); ++y)
            for (std::size_t z = 0; z < p.nz(); ++z) t[(px[x] * p.ny() + py[y]) * p.nz() + pz[z]] = p(x, y, z);
    return DiscretePMF(p.nx(), p.ny(), p.nz(), t);
}

}  // namespace

TEST_CASE("construction validates the table") {
    CHECK_THROWS_AS(DiscretePMF(2, 1, 1, {0.5, 0.6}), NormalizationError);
    CHECK_THROWS_AS(DiscretePMF(2, 1, 1, {1.5, -0.5}), NormalizationError);
    CHECK_THROWS(DiscretePMF(17, 1, 1, std::vector<double>(17, 1.0 / 17)));
    CHECK_THROWS(DiscretePMF(2, 2, 1, {1.0}));
}

TEST_CASE("hand examples") {
    const auto indep = from_cells(2, 2, 1, {{0, 0, 0, 0.06}, {0, 1, 0, 0.14}, {1, 0, 0, 0.24}, {1, 1, 0, 0.56}});
    CHECK(exact_mi(indep, MIPair::XY) == Approx(0.0).epsilon(1e-12));

    const auto copy = from_cells(2, 2, 2, {{0, 0, 0, 0.25}, {0, 0, 1, 0.25}, {1, 1, 0, 0.25}, {1, 1, 1, 0.25}});
    CHECK(exact_mi(copy, MIPair::XY) == Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(exact_cmi(copy) == Approx(std::log(2.0)).epsilon(1e-12));
    CHECK(exact_mi(copy, MIPair::XY) == Approx(0.693147).epsilon(1e-6));

    const auto all_equal = from_cells(2, 2, 2, {{0, 0, 0, 0.5}, {1, 1, 1, 0.5}});
    CHECK(exact_cmi(all_equal) == Approx(0.0).epsilon(1e-12));
    CHECK(exact_mi(all_equal, MIPair::XY) == Approx(std::log(2.0)).epsilon(1e-12));

    // z = 0: X = Y uniform; z = 1: X, Y independent uniform.
    const auto mix = from_cells(2, 2, 2, {{0, 0, 0, 0.25}, {1, 1, 0, 0.25}, {0, 0, 1, 0.125},
                                           {0, 1, 1, 0.125}, {1, 0, 1, 0.125}, {1, 1, 1, 0.125}});
    CHECK(exact_weak_cmi(mix) == Approx(0.13081204).epsilon(1e-8));
    CHECK(exact_cmi(mix) == Approx(0.34657359).epsilon(1e-8));
    CHECK(exact_weak_cmi(mix) < exact_cmi(mix));
}

TEST_CASE("agreement with an entropy-based reference") {
    Rng rng(21);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = DiscretePMF::random(3, 3, 2, rng);
        const Entropies h = entropies(p);
        const double hxy = entropy(p.marginal_xy());
        CHECK(std::abs(exact_mi(p, MIPair::XY) - (h.x + h.y - hxy)) < 1e-12);
        CHECK(std::abs(exact_mi(p, MIPair::XZ) - (h.x + h.z - h.xz)) < 1e-12);
        CHECK(std::abs(exact_mi(p, MIPair::YZ) - (h.y + h.z - h.yz)) < 1e-12);
        CHECK(std::abs(exact_mi(p, MIPair::X_YZ) - (h.x + h.yz - h.xyz)) < 1e-12);
        CHECK(std::abs(exact_cmi(p) - (h.xz + h.yz - h.xyz - h.z)) < 1e-12);
    }
}

TEST_CASE("weak CMI never exceeds CMI on random pmfs, and the chain rule holds") {
    Rng rng(22);
    int checked = 0;
    for (int trial = 0; trial < 10000; ++trial) {
        const std::size_t nx = 2 + rng.below(4), ny = 2 + rng.below(4), nz = 1 + rng.below(4);
        const auto p = DiscretePMF::random(nx, ny, nz, rng);
        const double cmi = exact_cmi(p);
        const double weak = exact_weak_cmi(p);
        if (!(weak >= 0.0 && weak <= cmi + 1e-12)) FAIL("ordering violated at trial " << trial);
        if (std::abs(cmi - (exact_mi(p, MIPair::X_YZ) - exact_mi(p, MIPair::XZ))) > 1e-10)
            FAIL("chain rule violated at trial " << trial);
        ++checked;
    }
    CHECK(checked == 10000);
}

TEST_CASE("Z independent of (X, Y) makes weak CMI equal MI") {
    Rng rng(23);
    for (int trial = 0; trial < 100; ++trial) {
        const auto pxy = DiscretePMF::random(3, 4, 1, rng);
        const auto pz = DiscretePMF::random(1, 1, 3, rng);
        std::vector<double> t;
        for (std::size_t x = 0; x < 3; ++x)
            for (std::size_t y = 0; y < 4; ++y)
                for (std::size_t z = 0; z < 3; ++z) t.push_back(pxy(x, y, 0) * pz(0, 0, z));
        double s = std::accumulate(t.begin(), t.end(), 0.0);
        for (double& v : t) v /= s;
        const DiscretePMF p(3, 4, 3, t);
        CHECK(std::abs(exact_weak_cmi(p) - exact_mi(p, MIPair::XY)) < 1e-12);
        CHECK(std::abs(exact_cmi(p) - exact_mi(p, MIPair::XY)) < 1e-12);
    }
}

TEST_CASE("conditional independence implies weak conditional independence") {
    Rng rng(24);
    for (int trial = 0; trial < 500; ++trial) {
        const auto p = DiscretePMF::random_conditionally_independent(1 + rng.below(6), 1 + rng.below(6),
                                                                     1 + rng.below(6), rng);
        CHECK(exact_cmi(p) < 1e-12);
        CHECK(exact_weak_cmi(p) < 1e-12);
    }
}

TEST_CASE("relabeling symbols leaves every quantity unchanged") {
    Rng rng(25);
    for (int trial = 0; trial < 200; ++trial) {
        const auto p = DiscretePMF::random(4, 3, 3, rng);
        const auto q = relabeled(p, rng);
        for (MIPair pair : {MIPair::XY, MIPair::XZ, MIPair::YZ, MIPair::X_YZ})
            CHECK(std::abs(exact_mi(p, pair) - exact_mi(q, pair)) < 1e-12);
        CHECK(std::abs(exact_cmi(p) - exact_cmi(q)) < 1e-12);
        CHECK(std::abs(exact_weak_cmi(p) - exact_weak_cmi(q)) < 1e-12);
    }
}

TEST_CASE("variational KL bound") {
    Rng rng(26);
    const auto p = DiscretePMF::random(3, 3, 2, rng);
    const auto q = DiscretePMF::random(3, 3, 2, rng);
    const std::vector<double> zero(p.table().size(), 0.0);
    CHECK(variational_kl_bound(p.table(), q.table(), zero) == Approx(0.0).epsilon(1e-15));
    std::vector<double> f_star(p.table().size());
    for (std::size_t i = 0; i < f_star.size(); ++i) f_star[i] = std::log(p.table()[i] / q.table()[i]);
    CHECK(std::abs(variational_kl_bound(p.table(), q.table(), f_star) - kl_divergence(p.table(), q.table())) < 1e-9);

    std::size_t violations = 0, trials = 0;
    for (int k = 0; k < 20; ++k) {
        const auto r = DiscretePMF::random(2 + rng.below(4), 2 + rng.below(4), 1 + rng.below(4), rng);
        const auto report = variational_kl_check(r, 1000, rng);
        violations += report.violations;
        trials += report.trials;
        CHECK(report.ok());
    }
    CHECK(violations == 0);
    CHECK(trials == 20 * 3 * 1000);
}

TEST_CASE("KL rejects unsupported mass") {
    CHECK_THROWS_AS(kl_divergence({0.5, 0.5}, {1.0, 0.0}), NormalizationError);
    CHECK(kl_divergence({0.0, 1.0}, {0.5, 0.5}) == Approx(std::log(2.0)));
}

TEST_CASE("property suite report") {
    const OracleSuiteReport r = run_oracle_suite(500, 100, 3);
    CHECK(r.pmfs == 500);
    CHECK(r.independence_cases == 100);
    CHECK(r.critics == 300);
    CHECK(r.ordering_violations == 0);
    CHECK(r.max_chain_rule_error <= 1e-10);
    CHECK(r.ok());
}
