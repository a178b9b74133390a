#include "doctest.h"

#include <cmath>

#include "cmi/autodiff.hpp"
#include "cmi/gradcheck.hpp"
#include "cmi/rng.hpp"
#include "support/finite_difference.hpp"

using namespace cmi;
using doctest::Approx;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.uniform(-1.0, 1.0);
    return m;
}

}  // namespace

TEST_CASE("matmul forward and dimension errors") {
    Tape t;
    Var a = t.constant(Matrix{{1, 2}, {3, 4}});
    Var id = t.constant(Matrix{{1, 0}, {0, 1}});
    CHECK(t.value(t.matmul(a, id)) == Matrix{{1, 2}, {3, 4}});
    Var r = t.constant(Matrix{{1, 2}});
    Var c = t.constant(Matrix{{3}, {4}});
    CHECK(t.scalar(t.matmul(r, c)) == 11.0);
    CHECK_THROWS_AS(t.matmul(a, r), DimensionError);
    CHECK_THROWS_AS(t.add(a, r), DimensionError);
}

TEST_CASE("matmul gradient of sum matches finite differences") {
    Rng rng(5);
    const Matrix a = random_matrix(3, 4, rng);
    const Matrix b = random_matrix(4, 2, rng);
    Tape t;
    Var va = t.variable(a);
    Var vb = t.variable(b);
    t.backward(t.sum(t.matmul(va, vb)));
    auto fa = [&](const Matrix& m) {
        Tape u;
        return u.scalar(u.sum(u.matmul(u.constant(m), u.constant(b))));
    };
    auto fb = [&](const Matrix& m) {
        Tape u;
        return u.scalar(u.sum(u.matmul(u.constant(a), u.constant(m))));
    };
    CHECK(testing::max_relative_error(t.grad(va), testing::numeric_gradient(fa, a)) < 1e-3);
    CHECK(testing::max_relative_error(t.grad(vb), testing::numeric_gradient(fb, b)) < 1e-3);
}

TEST_CASE("elementwise examples") {
    Tape t;
    CHECK(t.value(t.relu(t.constant(Matrix{{-1, 0, 2}}))) == Matrix{{0, 0, 2}});
    CHECK(t.scalar(t.exp(t.constant(Matrix{{0}}))) == 1.0);
    CHECK_THROWS_AS(t.log(t.constant(Matrix{{1.0, 0.0}})), DomainError);
    CHECK_THROWS_AS(t.log(t.constant(Matrix{{-2.0}})), DomainError);
}

TEST_CASE("mul gradient matches finite differences") {
    Rng rng(9);
    const Matrix a = random_matrix(3, 3, rng);
    const Matrix b = random_matrix(3, 3, rng);
    Tape t;
    Var va = t.variable(a);
    t.backward(t.sum(t.mul(va, t.constant(b))));
    auto f = [&](const Matrix& m) {
        Tape u;
        return u.scalar(u.sum(u.mul(u.constant(m), u.constant(b))));
    };
    CHECK(testing::max_relative_error(t.grad(va), testing::numeric_gradient(f, a)) < 1e-3);
}

TEST_CASE("row_logsumexp examples") {
    Tape t;
    CHECK(t.scalar(t.row_logsumexp(t.constant(Matrix{{0, 0}}))) == Approx(0.6931471805599453).epsilon(1e-15));
    const double big = t.scalar(t.row_logsumexp(t.constant(Matrix{{1000, 1000}})));
    CHECK(std::isfinite(big));
    CHECK(big == Approx(1000.0 + std::log(2.0)).epsilon(1e-15));
    CHECK(t.scalar(t.row_logsumexp(t.constant(Matrix{{0, 1, 2}}))) == Approx(2.40760596).epsilon(1e-8));
}

TEST_CASE("row_logsumexp is shift equivariant") {
    Rng rng(2);
    for (int trial = 0; trial < 50; ++trial) {
        Matrix a = random_matrix(4, 6, rng);
        const double c = rng.uniform(-50.0, 50.0);
        Matrix shifted = a;
        for (double& v : shifted.data()) v += c;
        Tape t;
        const Matrix base = t.value(t.row_logsumexp(t.constant(a)));
        const Matrix moved = t.value(t.row_logsumexp(t.constant(shifted)));
        for (std::size_t i = 0; i < base.size(); ++i) CHECK(std::abs(moved[i] - base[i] - c) < 1e-12);
    }
}

TEST_CASE("cosine_rows examples") {
    Tape t;
    Var a = t.constant(Matrix{{1, 0}, {0, 3}});
    Var b = t.constant(Matrix{{2, 0}, {0, 1}});
    const Matrix s = t.value(t.cosine_rows(a, b, 1.0));
    CHECK(s(0, 0) == Approx(1.0));
    CHECK(s(1, 1) == Approx(1.0));
    CHECK(s(0, 1) == 0.0);
    CHECK(s(1, 0) == 0.0);
    const double v = t.scalar(t.cosine_rows(t.constant(Matrix{{1, 0}}), t.constant(Matrix{{1, 1}}), 0.5));
    CHECK(v == Approx(1.41421356).epsilon(1e-8));
}

TEST_CASE("cosine scores stay within 1/tau") {
    Rng rng(4);
    for (double tau : {0.1, 0.5, 1.0}) {
        Tape t;
        const Matrix s = t.value(t.cosine_rows(t.constant(random_matrix(8, 5, rng)),
                                               t.constant(random_matrix(8, 5, rng)), tau));
        for (double v : s.data()) CHECK(std::abs(v) * tau <= 1.0 + 1e-12);
    }
}

TEST_CASE("zero-norm rows are clamped and counted on the tape, rejected standalone") {
    Tape t;
    const Matrix s = t.value(t.cosine_rows(t.constant(Matrix{{0, 0}, {1, 0}}), t.constant(Matrix{{1, 0}, {0, 1}}), 1.0));
    CHECK(s.all_finite());
    CHECK(t.degenerate_rows() == 1);
    CHECK_THROWS_AS(cosine_similarity(Matrix{{0, 0}}, Matrix{{1, 0}}, 1.0), DomainError);
    CHECK_THROWS_AS(cosine_similarity(Matrix{{1, 0}}, Matrix{{1, 0}}, 0.0), DomainError);
}

TEST_CASE("every op passes the finite-difference suite") {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        for (const auto& r : run_gradcheck_suite(seed)) {
            INFO(r.name << " seed " << seed);
            CHECK(r.max_rel_error < 1e-3);
        }
    }
}

TEST_CASE("backward is deterministic") {
    Rng rng(8);
    Tape t;
    Var a = t.variable(random_matrix(4, 3, rng));
    Var b = t.variable(random_matrix(5, 3, rng));
    Var s = t.cosine_rows(t.relu(a), b, 0.3);
    Var loss = t.mean(t.sub(t.diag(t.matmul(s, t.transpose(s))), t.row_logsumexp(s)));
    t.backward(loss);
    const Matrix ga = t.grad(a), gb = t.grad(b);
    t.backward(loss);
    CHECK(t.grad(a) == ga);
    CHECK(t.grad(b) == gb);
}

TEST_CASE("parameter gradients accumulate across backward calls") {
    Parameter p(Matrix{{1.0, 2.0}});
    for (int k = 1; k <= 2; ++k) {
        Tape t;
        t.backward(t.sum(t.scale(t.parameter(p), 3.0)));
        CHECK(p.grad == Matrix{{3.0 * k, 3.0 * k}});
    }
    p.zero_grad();
    CHECK(p.grad == Matrix{{0.0, 0.0}});
}

TEST_CASE("backward requires a scalar root") {
    Tape t;
    Var a = t.variable(Matrix{{1, 2}});
    CHECK_THROWS_AS(t.backward(a), DimensionError);
}

TEST_CASE("finite input yields finite output across ops") {
    Rng rng(12);
    Tape t;
    Var a = t.variable(random_matrix(6, 6, rng));
    Var big = t.scale(a, 500.0);
    CHECK(t.value(t.row_logsumexp(big)).all_finite());
    CHECK(t.value(t.normalize_rows(a)).all_finite());
    CHECK(t.value(t.cosine_rows(a, a, 0.05)).all_finite());
}
