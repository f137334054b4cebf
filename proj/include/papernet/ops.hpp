// SPDX-License-Identifier: Apache-2.0
#pragma once

// Differentiable primitives. Each op records a backward rule on the active
// Tape<T> when one of its inputs requires a gradient.

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "papernet/tensor.hpp"

namespace papernet::ops {

enum class Activation { relu, sigmoid, tanh, softmax };
enum class Reduction { sum, mean, max };

// 2-D products.
template <class T> Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a[m x k] * b^T where b is [n x k].
template <class T> Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);

// Elementwise.
template <class T> Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> scale(const Tensor<T>& x, T factor);
/// x[..., n] + bias[n]
template <class T> Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias);

template <class T> Tensor<T> relu(const Tensor<T>& x);
template <class T> Tensor<T> sigmoid(const Tensor<T>& x);
template <class T> Tensor<T> tanh(const Tensor<T>& x);
/// Row-wise over the last axis, max-subtracted.
template <class T> Tensor<T> softmax(const Tensor<T>& x);
template <class T> Tensor<T> activation(const Tensor<T>& x, Activation kind);

/// Reduces one axis away. Max routes the gradient to the first argmax.
template <class T> Tensor<T> reduce(const Tensor<T>& x, Reduction kind, std::size_t axis);
template <class T> Tensor<T> sum_all(const Tensor<T>& x);
/// Sum of squared entries, as a scalar.
template <class T> Tensor<T> sum_squares(const Tensor<T>& x);

// Layout.
template <class T> Tensor<T> reshape(const Tensor<T>& x, Shape shape);
template <class T> Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b);
template <class T> Tensor<T> slice_last(const Tensor<T>& x, std::size_t begin, std::size_t len);
/// x[B x T x D] -> x[:, t, :] as [B x D].
template <class T> Tensor<T> select_time(const Tensor<T>& x, std::size_t t);
/// steps[t] is [B x D]; returns [B x T x D].
template <class T> Tensor<T> stack_time(const std::vector<Tensor<T>>& steps);
/// f[B x T x C] * a[B x C] broadcast over T.
template <class T> Tensor<T> scale_channels(const Tensor<T>& f, const Tensor<T>& a);

/// Inverted dropout. Identity when !training or p == 0.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, std::mt19937_64& rng);

/// Mean over the batch of -w[y_i] * log(max(probs[i, y_i], 1e-12)).
template <class T>
Tensor<T> weighted_nll(const Tensor<T>& probs, std::span<const int> labels,
                       std::span<const double> class_weights);

}  // namespace papernet::ops
