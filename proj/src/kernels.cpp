#include "tpt/kernels.hpp"

#include <algorithm>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace tpt::kernels {

namespace {

bool worth_parallel(std::size_t work) {
#ifdef _OPENMP
  return work >= kParallelWorkThreshold && omp_get_max_threads() > 1 && !omp_in_parallel();
#else
  (void)work;
  return false;
#endif
}

inline void softmax_row(const double* x, double* y, std::size_t cols) {
  double mx = x[0];
  for (std::size_t j = 1; j < cols; ++j) mx = std::max(mx, x[j]);
  double total = 0.0;
  for (std::size_t j = 0; j < cols; ++j) {
    y[j] = std::exp(x[j] - mx);
    total += y[j];
  }
  const double inv = 1.0 / total;
  for (std::size_t j = 0; j < cols; ++j) y[j] *= inv;
}

}  // namespace

bool parallel_available() noexcept {
#ifdef _OPENMP
  return true;
#else
  return false;
#endif
}

int max_threads() noexcept {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    double* ci = c.data() + i * n;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = a[i * k + p];
      const double* bp = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n) {
  const double* ap = a.data();
  const double* bp0 = b.data();
  double* cp = c.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    double* ci = cp + i * n;
    std::fill(ci, ci + n, 0.0);
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = ap[i * k + p];
      const double* bp = bp0 + p * n;
      for (std::size_t j = 0; j < n; ++j) ci[j] += aip * bp[j];
    }
  }
}

void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n) {
  if (worth_parallel(m * k * n)) {
    matmul_parallel(a, b, c, m, k, n);
  } else {
    matmul_serial(a, b, c, m, k, n);
  }
}

void matmul_nt_acc_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                          std::size_t m, std::size_t n, std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const double* ai = a.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = b.data() + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      c[i * k + p] += acc;
    }
  }
}

void matmul_nt_acc_parallel(std::span<const double> a, std::span<const double> b,
                            std::span<double> c, std::size_t m, std::size_t n, std::size_t k) {
  const double* ap = a.data();
  const double* bp0 = b.data();
  double* cp = c.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ii = 0; ii < static_cast<std::ptrdiff_t>(m); ++ii) {
    const auto i = static_cast<std::size_t>(ii);
    const double* ai = ap + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const double* bp = bp0 + p * n;
      double acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += ai[j] * bp[j];
      cp[i * k + p] += acc;
    }
  }
}

void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t n, std::size_t k) {
  if (worth_parallel(m * n * k)) {
    matmul_nt_acc_parallel(a, b, c, m, n, k);
  } else {
    matmul_nt_acc_serial(a, b, c, m, n, k);
  }
}

void matmul_tn_acc_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                          std::size_t m, std::size_t k, std::size_t n) {
  // Row p of c accumulates over i in increasing order.
  for (std::size_t p = 0; p < k; ++p) {
    double* cp = c.data() + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = a[i * k + p];
      const double* bi = b.data() + i * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

void matmul_tn_acc_parallel(std::span<const double> a, std::span<const double> b,
                            std::span<double> c, std::size_t m, std::size_t k, std::size_t n) {
  const double* ap = a.data();
  const double* bp = b.data();
  double* cp0 = c.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t pp = 0; pp < static_cast<std::ptrdiff_t>(k); ++pp) {
    const auto p = static_cast<std::size_t>(pp);
    double* cp = cp0 + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      const double aip = ap[i * k + p];
      const double* bi = bp + i * n;
      for (std::size_t j = 0; j < n; ++j) cp[j] += aip * bi[j];
    }
  }
}

void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n) {
  if (worth_parallel(m * k * n)) {
    matmul_tn_acc_parallel(a, b, c, m, k, n);
  } else {
    matmul_tn_acc_serial(a, b, c, m, k, n);
  }
}

void softmax_rows_serial(std::span<const double> x, std::span<double> y, std::size_t rows,
                         std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) softmax_row(x.data() + r * cols, y.data() + r * cols, cols);
}

void softmax_rows_parallel(std::span<const double> x, std::span<double> y, std::size_t rows,
                           std::size_t cols) {
  const double* xp = x.data();
  double* yp = y.data();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t r = 0; r < static_cast<std::ptrdiff_t>(rows); ++r) {
    const auto row = static_cast<std::size_t>(r);
    softmax_row(xp + row * cols, yp + row * cols, cols);
  }
}

void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols) {
  if (worth_parallel(rows * cols * 8)) {
    softmax_rows_parallel(x, y, rows, cols);
  } else {
    softmax_rows_serial(x, y, rows, cols);
  }
}

}  // namespace tpt::kernels
