// SPDX-License-Identifier: Apache-2.0
#include <omp.h>

#include <algorithm>

#include "papernet/kernels.hpp"

namespace papernet::kernels::parallel {

namespace {
// Below this many multiply-adds the fork/join cost dominates.
constexpr std::size_t kMinParallelWork = 1 << 15;
}  // namespace

template <class T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  const T* A = a.data();
  const T* B = b.data();
  T* C = c.data();
  const long rows = static_cast<long>(m);
  const bool big = m * k * n >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (long i = 0; i < rows; ++i) {
    T* crow = C + i * n;
    if (!accumulate) std::fill(crow, crow + n, T{0});
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = A[i * k + p];
      const T* brow = B + p * n;
#pragma omp simd
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows,
               std::size_t cols) {
  const long r_end = static_cast<long>(rows);
  const bool big = rows * cols >= kMinParallelWork;
#pragma omp parallel for schedule(static) if (big)
  for (long r = 0; r < r_end; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
}

template void gemm<float>(std::span<const float>, std::span<const float>,
                          std::span<float>, std::size_t, std::size_t,
                          std::size_t, bool);
template void gemm<double>(std::span<const double>, std::span<const double>,
                           std::span<double>, std::size_t, std::size_t,
                           std::size_t, bool);
template void transpose<float>(std::span<const float>, std::span<float>,
                               std::size_t, std::size_t);
template void transpose<double>(std::span<const double>, std::span<double>,
                                std::size_t, std::size_t);

}  // namespace papernet::kernels::parallel
