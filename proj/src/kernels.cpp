#include "cmi/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace cmi::kernels {
namespace {

void check_inner(std::size_t lhs, std::size_t rhs, const char* what) {
    if (lhs != rhs) throw DimensionError(std::string(what) + ": inner dimensions differ");
}

// Per-row bodies shared by both variants so the accumulation order is identical.
inline void matmul_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    const std::size_t n = b.cols();
    double* ci = c.data().data() + i * n;
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = a(i, k);
        const double* bk = b.data().data() + k * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aik * bk[j];
    }
}

inline void matmul_tn_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    const std::size_t n = b.cols();
    double* ci = c.data().data() + i * n;
    for (std::size_t k = 0; k < a.rows(); ++k) {
        const double aki = a(k, i);
        const double* bk = b.data().data() + k * n;
        for (std::size_t j = 0; j < n; ++j) ci[j] += aki * bk[j];
    }
}

inline void matmul_nt_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i) {
    const std::size_t inner = a.cols();
    const double* ai = a.data().data() + i * inner;
    for (std::size_t j = 0; j < b.rows(); ++j) {
        const double* bj = b.data().data() + j * inner;
        double s = 0.0;
        for (std::size_t k = 0; k < inner; ++k) s += ai[k] * bj[k];
        c(i, j) = s;
    }
}

inline void logsumexp_row(const Matrix& a, Matrix& out, std::size_t r) {
    auto row = a.row_span(r);
    const double m = *std::max_element(row.begin(), row.end());
    double s = 0.0;
    for (double v : row) s += std::exp(v - m);
    out(r, 0) = m + std::log(s);
}

}  // namespace

namespace serial {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_row(a, b, c, i);
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_inner(a.rows(), b.rows(), "matmul_tn");
    Matrix c(a.cols(), b.cols());
    for (std::size_t i = 0; i < a.cols(); ++i) matmul_tn_row(a, b, c, i);
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.cols(), "matmul_nt");
    Matrix c(a.rows(), b.rows());
    for (std::size_t i = 0; i < a.rows(); ++i) matmul_nt_row(a, b, c, i);
    return c;
}

Matrix row_logsumexp(const Matrix& a) {
    if (a.empty()) throw DimensionError("row_logsumexp: empty input");
    Matrix out(a.rows(), 1);
    for (std::size_t r = 0; r < a.rows(); ++r) logsumexp_row(a, out, r);
    return out;
}

}  // namespace serial

namespace omp {

Matrix matmul(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.rows(), "matmul");
    Matrix c(a.rows(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_row(a, b, c, static_cast<std::size_t>(i));
    return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    check_inner(a.rows(), b.rows(), "matmul_tn");
    Matrix c(a.cols(), b.cols());
    const auto rows = static_cast<std::ptrdiff_t>(a.cols());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_tn_row(a, b, c, static_cast<std::size_t>(i));
    return c;
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    check_inner(a.cols(), b.cols(), "matmul_nt");
    Matrix c(a.rows(), b.rows());
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < rows; ++i) matmul_nt_row(a, b, c, static_cast<std::size_t>(i));
    return c;
}

Matrix row_logsumexp(const Matrix& a) {
    if (a.empty()) throw DimensionError("row_logsumexp: empty input");
    Matrix out(a.rows(), 1);
    const auto rows = static_cast<std::ptrdiff_t>(a.rows());
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t r = 0; r < rows; ++r) logsumexp_row(a, out, static_cast<std::size_t>(r));
    return out;
}

}  // namespace omp

namespace {
bool worth_parallel(std::size_t work) { return work >= kParallelThreshold && max_threads() > 1; }
}  // namespace

Matrix matmul(const Matrix& a, const Matrix& b) {
    return worth_parallel(a.rows() * a.cols() * b.cols()) ? omp::matmul(a, b) : serial::matmul(a, b);
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    return worth_parallel(a.rows() * a.cols() * b.cols()) ? omp::matmul_tn(a, b)
                                                          : serial::matmul_tn(a, b);
}

Matrix matmul_nt(const Matrix& a, const Matrix& b) {
    return worth_parallel(a.rows() * a.cols() * b.rows()) ? omp::matmul_nt(a, b)
                                                          : serial::matmul_nt(a, b);
}

Matrix row_logsumexp(const Matrix& a) {
    return worth_parallel(a.size() * 16) ? omp::row_logsumexp(a) : serial::row_logsumexp(a);
}

int max_threads() {
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

}  // namespace cmi::kernels
