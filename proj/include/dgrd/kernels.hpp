#pragma once

#include <cstddef>

namespace dgrd::kernels {

// Dense row-major matrix kernels. Every parallel kernel distributes whole
// output rows across threads and keeps the per-row arithmetic order identical
// to the serial reference, so serial and parallel results are bit-identical
// for any thread count.

namespace serial {

// C[m x n] = A[m x k] * B[k x n]
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
// C[m x n] = A[r x m]^T * B[r x n]
void matmul_at(const double* a, const double* b, double* c, int r, int m, int n);
// C[m x n] = A[m x k] * B[n x k]^T
void matmul_bt(const double* a, const double* b, double* c, int m, int k, int n);
// y[i] += x[i] * alpha
void axpy(const double* x, double alpha, double* y, std::size_t n);

}  // namespace serial

// Parallel variants (OpenMP when enabled, otherwise the serial path).
void matmul(const double* a, const double* b, double* c, int m, int k, int n);
void matmul_at(const double* a, const double* b, double* c, int r, int m, int n);
void matmul_bt(const double* a, const double* b, double* c, int m, int k, int n);

bool openmp_enabled();
int max_threads();

}  // namespace dgrd::kernels
