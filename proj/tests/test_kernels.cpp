#include "doctest.h"

#include <omp.h>

#include <cstddef>

#include "cmi/kernels.hpp"
#include "cmi/rng.hpp"

using namespace cmi;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
    Matrix m(r, c);
    for (double& v : m.data()) v = rng.normal();
    return m;
}

}  // namespace

TEST_CASE("serial matmul hand examples") {
    Matrix a{{1, 2}, {3, 4}};
    Matrix id{{1, 0}, {0, 1}};
    CHECK(kernels::serial::matmul(a, id) == a);
    Matrix r{{1, 2}};
    Matrix c{{3}, {4}};
    CHECK(kernels::serial::matmul(r, c)(0, 0) == 11.0);
    CHECK_THROWS_AS(kernels::serial::matmul(a, r), DimensionError);
}

TEST_CASE("transposed variants agree with explicit transposes") {
    Rng rng(7);
    Matrix a = random_matrix(5, 3, rng);
    Matrix b = random_matrix(5, 4, rng);
    Matrix c = random_matrix(6, 3, rng);
    CHECK(kernels::serial::matmul_tn(a, b) == kernels::serial::matmul(a.transposed(), b));
    CHECK(kernels::serial::matmul_nt(a, c) == kernels::serial::matmul(a, c.transposed()));
}

TEST_CASE("OpenMP kernels are bitwise identical to the serial reference") {
    Rng rng(11);
    const int saved = omp_get_max_threads();
    for (int threads : {1, 2, 4}) {
        omp_set_num_threads(threads);
        const std::size_t shapes[][3] = {{1, 1, 1}, {7, 3, 5}, {64, 64, 64}, {130, 17, 33}};
        for (const auto& [m, k, n] : shapes) {
            Matrix a = random_matrix(m, k, rng);
            Matrix b = random_matrix(k, n, rng);
            Matrix at = random_matrix(k, m, rng);
            Matrix bt = random_matrix(n, k, rng);
            CHECK(kernels::omp::matmul(a, b) == kernels::serial::matmul(a, b));
            CHECK(kernels::omp::matmul_tn(at, b) == kernels::serial::matmul_tn(at, b));
            CHECK(kernels::omp::matmul_nt(a, bt) == kernels::serial::matmul_nt(a, bt));
            CHECK(kernels::omp::row_logsumexp(a) == kernels::serial::row_logsumexp(a));
        }
    }
    omp_set_num_threads(saved);
}

TEST_CASE("dispatching entry points match the reference above the threshold") {
    Rng rng(3);
    Matrix a = random_matrix(128, 96, rng);
    Matrix b = random_matrix(96, 80, rng);
    CHECK(kernels::matmul(a, b) == kernels::serial::matmul(a, b));
}
