#pragma once

// Dense row-major kernels used by the autodiff engine.
//
// Every kernel comes in two flavours: a serial reference and an OpenMP
// version that parallelizes over output rows. Both accumulate each output
// element in the same order, so their results are bit-identical; the tests
// rely on that. The unsuffixed entry points dispatch on problem size.

#include <cstddef>
#include <span>

namespace tpt::kernels {

// Work (multiply-adds) below which the dispatchers stay serial.
inline constexpr std::size_t kParallelWorkThreshold = 1u << 16;

bool parallel_available() noexcept;
int max_threads() noexcept;

// c[m x n] = a[m x k] * b[k x n]
void matmul_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);
void matmul_parallel(std::span<const double> a, std::span<const double> b, std::span<double> c,
                     std::size_t m, std::size_t k, std::size_t n);
void matmul(std::span<const double> a, std::span<const double> b, std::span<double> c,
            std::size_t m, std::size_t k, std::size_t n);

// c[m x k] += a[m x n] * b[k x n]^T
void matmul_nt_acc_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                          std::size_t m, std::size_t n, std::size_t k);
void matmul_nt_acc_parallel(std::span<const double> a, std::span<const double> b,
                            std::span<double> c, std::size_t m, std::size_t n, std::size_t k);
void matmul_nt_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t n, std::size_t k);

// c[k x n] += a[m x k]^T * b[m x n]
void matmul_tn_acc_serial(std::span<const double> a, std::span<const double> b, std::span<double> c,
                          std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc_parallel(std::span<const double> a, std::span<const double> b,
                            std::span<double> c, std::size_t m, std::size_t k, std::size_t n);
void matmul_tn_acc(std::span<const double> a, std::span<const double> b, std::span<double> c,
                   std::size_t m, std::size_t k, std::size_t n);

// Numerically stabilized softmax over contiguous rows of length `cols`.
void softmax_rows_serial(std::span<const double> x, std::span<double> y, std::size_t rows,
                         std::size_t cols);
void softmax_rows_parallel(std::span<const double> x, std::span<double> y, std::size_t rows,
                           std::size_t cols);
void softmax_rows(std::span<const double> x, std::span<double> y, std::size_t rows,
                  std::size_t cols);

}  // namespace tpt::kernels
