#include "dgrd/kernels.hpp"

#include <cstring>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace dgrd::kernels {

namespace {

// One output row of C = A * B: c_row[0..n) = sum_k a_row[k] * B[k, 0..n).
// The j-loop is contiguous over both c_row and B rows and vectorizes well.
inline void matmul_row(const double* a_row, const double* b, double* c_row, int k, int n) {
  std::memset(c_row, 0, sizeof(double) * static_cast<std::size_t>(n));
  for (int p = 0; p < k; ++p) {
    const double av = a_row[p];
    const double* b_row = b + static_cast<std::size_t>(p) * n;
    for (int j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

// One output row of C = A^T * B (A is r x m): c_row_i[j] = sum_t A[t,i] * B[t,j].
inline void matmul_at_row(const double* a, const double* b, double* c_row, int i, int r, int m,
                          int n) {
  std::memset(c_row, 0, sizeof(double) * static_cast<std::size_t>(n));
  for (int t = 0; t < r; ++t) {
    const double av = a[static_cast<std::size_t>(t) * m + i];
    const double* b_row = b + static_cast<std::size_t>(t) * n;
    for (int j = 0; j < n; ++j) c_row[j] += av * b_row[j];
  }
}

// One output row of C = A * B^T (B is n x k): c_row[j] = dot(a_row, B[j,:]).
// Eight independent accumulator lanes break the reduction dependency so the
// loop vectorizes; the summation order is fixed, keeping results identical
// across serial and parallel paths.
inline void matmul_bt_row(const double* a_row, const double* b, double* c_row, int k, int n) {
  for (int j = 0; j < n; ++j) {
    const double* b_row = b + static_cast<std::size_t>(j) * k;
    double lanes[8] = {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0};
    int p = 0;
    for (; p + 8 <= k; p += 8) {
      for (int l = 0; l < 8; ++l) lanes[l] += a_row[p + l] * b_row[p + l];
    }
    double acc = ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                 ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]));
    for (; p < k; ++p) acc += a_row[p] * b_row[p];
    c_row[j] = acc;
  }
}

}  // namespace

namespace serial {

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    matmul_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n);
  }
}

void matmul_at(const double* a, const double* b, double* c, int r, int m, int n) {
  for (int i = 0; i < m; ++i) {
    matmul_at_row(a, b, c + static_cast<std::size_t>(i) * n, i, r, m, n);
  }
}

void matmul_bt(const double* a, const double* b, double* c, int m, int k, int n) {
  for (int i = 0; i < m; ++i) {
    matmul_bt_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n);
  }
}

void axpy(const double* x, double alpha, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace serial

void matmul(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<long>(m) * k * n > 65536)
  for (int i = 0; i < m; ++i) {
    matmul_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n);
  }
}

void matmul_at(const double* a, const double* b, double* c, int r, int m, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<long>(r) * m * n > 65536)
  for (int i = 0; i < m; ++i) {
    matmul_at_row(a, b, c + static_cast<std::size_t>(i) * n, i, r, m, n);
  }
}

void matmul_bt(const double* a, const double* b, double* c, int m, int k, int n) {
#pragma omp parallel for schedule(static) if (m > 1 && static_cast<long>(m) * k * n > 65536)
  for (int i = 0; i < m; ++i) {
    matmul_bt_row(a + static_cast<std::size_t>(i) * k, b, c + static_cast<std::size_t>(i) * n, k, n);
  }
}

bool openmp_enabled() {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace dgrd::kernels
