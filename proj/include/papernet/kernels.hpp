// SPDX-License-Identifier: Apache-2.0
#pragma once

// Data-parallel inner loops. Every kernel has a serial reference and an
// OpenMP implementation; both produce bitwise-identical results because
// each output element is reduced by exactly one thread in a fixed order.

#include <cstddef>
#include <span>

namespace papernet::kernels {

enum class Backend { serial, parallel };

/// Process-wide kernel selection (default: parallel).
void set_backend(Backend backend);
Backend backend();

class ScopedBackend {
 public:
  explicit ScopedBackend(Backend b) : previous_(backend()) { set_backend(b); }
  ~ScopedBackend() { set_backend(previous_); }
  ScopedBackend(const ScopedBackend&) = delete;
  ScopedBackend& operator=(const ScopedBackend&) = delete;

 private:
  Backend previous_;
};

// Row-major shapes: a[m x k], b[k x n], c[m x n].
// gemm_*: c = a*b (overwrite) ; gemm_*_acc: c += a*b.
// transpose: out[cols x rows] = in[rows x cols]^T.
// sosfilt: in-place cascade of second-order sections in transposed direct
// form II. coeffs holds 6 values per section (b0 b1 b2 1 a1 a2) and state
// holds 2 per section, updated on return.

namespace serial {
template <class T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows,
               std::size_t cols);
void sosfilt(std::span<const double> coeffs, std::span<double> state,
             std::span<double> signal);
}  // namespace serial

namespace parallel {
template <class T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate);
template <class T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows,
               std::size_t cols);
}  // namespace parallel

// Dispatching entry points.
template <class T>
void gemm(std::span<const T> a, std::span<const T> b, std::span<T> c,
          std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

/// c = a * b^T with b given as [n x k].
template <class T>
void gemm_nt(std::span<const T> a, std::span<const T> b, std::span<T> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

/// c = a^T * b with a given as [k x m] and b as [k x n].
template <class T>
void gemm_tn(std::span<const T> a, std::span<const T> b, std::span<T> c,
             std::size_t m, std::size_t k, std::size_t n, bool accumulate = false);

template <class T>
void transpose(std::span<const T> in, std::span<T> out, std::size_t rows,
               std::size_t cols);

}  // namespace papernet::kernels
