// SPDX-License-Identifier: Apache-2.0
#include "papernet/kernels.hpp"

#include <algorithm>

namespace papernet::kernels::serial {

template <class T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (!accumulate) std::fill(c.begin(), c.begin() + m * n, T{0});
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c.data() + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * k + p];
      const T* brow = b.data() + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows,
               std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
}

void sosfilt(std::span<const double> coeffs, std::span<double> state,
             std::span<double> signal) {
  const std::size_t sections = coeffs.size() / 6;
  for (double& x : signal) {
    double v = x;
    for (std::size_t s = 0; s < sections; ++s) {
      const double* q = coeffs.data() + 6 * s;
      double* z = state.data() + 2 * s;
      const double y = q[0] * v + z[0];
      z[0] = q[1] * v - q[4] * y + z[1];
      z[1] = q[2] * v - q[5] * y;
      v = y;
    }
    x = v;
  }
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

}  // namespace papernet::kernels::serial
