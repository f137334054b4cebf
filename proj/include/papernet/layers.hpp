// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <random>

#include "papernet/ops.hpp"
#include "papernet/tensor.hpp"

namespace papernet {

enum class Mode { train, infer };

inline constexpr double kBatchNormEps = 1e-3;
inline constexpr double kBatchNormMomentum = 0.99;

/// Zero-padded, stride-1 cross-correlation along the sequence axis.
/// input [B x T x Cin], kernel [k x Cin x Cout] (k odd), bias [Cout].
template <class T>
Tensor<T> conv1d_same(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias);

template <class T>
struct BatchNormParams {
  Tensor<T> gamma, beta;
  Tensor<T> running_mean, running_var;  // not trained; updated in train mode
};

/// Per-channel normalization of [B x T x C] over (B, T). Train mode uses
/// batch statistics and updates the running averages
/// (new = momentum * old + (1 - momentum) * batch).
template <class T>
Tensor<T> batchnorm(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode,
                    double eps = kBatchNormEps, double momentum = kBatchNormMomentum);

/// [B x T x C] -> [B x floor(T/2) x C] for the default window; a trailing
/// element that does not fill a window is dropped.
template <class T>
Tensor<T> maxpool1d(const Tensor<T>& input, std::size_t pool = 2, std::size_t stride = 2);

/// x[B x in] * weight[in x out] + bias[out]
template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

template <class T>
struct SeParams {
  Tensor<T> w1, b1;  // [C x R], [R]
  Tensor<T> w2, b2;  // [R x C], [C]
};

template <class T>
struct SeOutput {
  Tensor<T> features;   // F' [B x T x C]
  Tensor<T> attention;  // a  [B x C]
};

/// Squeeze (time mean), excite (relu bottleneck then sigmoid), rescale.
/// With `residual` the output is a*F + F, otherwise a*F.
template <class T>
SeOutput<T> se_residual_attention(const Tensor<T>& features, const SeParams<T>& params,
                                  bool residual);

template <class T>
struct LstmParams {
  Tensor<T> weight;  // [4H x (D + H)], gate blocks ordered i, f, g, o
  Tensor<T> bias;    // [4H]
};

template <class T>
struct BiLstmParams {
  LstmParams<T> forward, backward;
};

/// One LSTM direction over [B x T x D] with zero initial state. `reverse`
/// walks t = T-1 .. 0; outputs are stored at their own time index.
template <class T>
Tensor<T> lstm(const Tensor<T>& input, const LstmParams<T>& params, bool reverse);

/// [B x T x D] -> [B x T x 2H], forward and backward outputs concatenated.
template <class T>
Tensor<T> bilstm(const Tensor<T>& input, const BiLstmParams<T>& params);

/// Inverted dropout; identity in infer mode.
template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, Mode mode, std::mt19937_64& rng) {
  return ops::dropout(x, p, mode == Mode::train, rng);
}

}  // namespace papernet
