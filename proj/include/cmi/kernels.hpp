#pragma once

// Dense kernels used by the autodiff tape. Each kernel has a serial reference
// and an OpenMP version; both accumulate every output element in the same
// order, so their results are bitwise identical.

#include "cmi/matrix.hpp"

namespace cmi::kernels {

// Work (rows * cols * inner) below which the dispatching entry points stay serial.
inline constexpr std::size_t kParallelThreshold = 1u << 16;

namespace serial {
Matrix matmul(const Matrix& a, const Matrix& b);      // a * b
Matrix matmul_tn(const Matrix& a, const Matrix& b);   // a^T * b
Matrix matmul_nt(const Matrix& a, const Matrix& b);   // a * b^T
Matrix row_logsumexp(const Matrix& a);
}  // namespace serial

namespace omp {
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix row_logsumexp(const Matrix& a);
}  // namespace omp

// Dispatch on problem size.
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix matmul_tn(const Matrix& a, const Matrix& b);
Matrix matmul_nt(const Matrix& a, const Matrix& b);
Matrix row_logsumexp(const Matrix& a);

int max_threads();

}  // namespace cmi::kernels
