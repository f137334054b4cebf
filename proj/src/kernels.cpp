// SPDX-License-Identifier: Apache-2.0
#include <atomic>
#include <vector>

#include "papernet/kernels.hpp"

namespace papernet::kernels {

namespace {
std::atomic<Backend> g_backend{Backend::parallel};
}

void set_backend(Backend b) { g_backend.store(b); }
Backend backend() { return g_backend.load(); }

template <class T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  if (backend() == Backend::serial)
    serial::gemm<T>(a, b, c, m, k, n, accumulate);
  else
    parallel::gemm<T>(a, b, c, m, k, n, accumulate);
}

template <class T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows,
               std::size_t cols) {
  if (backend() == Backend::serial)
    serial::transpose<T>(in, out, rows, cols);
  else
    parallel::transpose<T>(in, out, rows, cols);
}

template <class T>
void gemm_nt(std::span<const T> a, std::span<const T> b, std::span<T> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  std::vector<T> bt(k * n);
  transpose<T>(b.first(n * k), bt, n, k);
  gemm<T>(a, bt, c, m, k, n, accumulate);
}

template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate) {
  std::vector<T> at(m * k);
  transpose<T>(a.first(k * m), at, k, m);
  gemm<T>(at, b, c, m, k, n, accumulate);
}

#define PAPERNET_INSTANTIATE(T)                                                \
  template void gemm<T>(std::span<const T>, std::span<const T>, std::span<T>,  \
                        std::size_t, std::size_t, std::size_t, bool);          \
  template void gemm_nt<T>(std::span<const T>, std::span<const T>,             \
                           std::span<T>, std::size_t, std::size_t,             \
                           std::size_t, bool);                                 \
  template void gemm_tn<T>(std::span<const T>, std::span<const T>,             \
                           std::span<T>, std::size_t, std::size_t,             \
                           std::size_t, bool);                                 \
  template void transpose<T>(std::span<const T>, std::span<T>, std::size_t,    \
                             std::size_t);

PAPERNET_INSTANTIATE(float)
PAPERNET_INSTANTIATE(double)
#undef PAPERNET_INSTANTIATE

}  // namespace papernet::kernels
