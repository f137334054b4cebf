// SPDX-License-Identifier: Apache-2.0
#include "papernet/layers.hpp"

#include <cmath>

#include "papernet/kernels.hpp"
#include "papernet/op_record.hpp"

namespace papernet {

using detail::record;

template <class T>
Tensor<T> conv1d_same(const Tensor<T>& input, const Tensor<T>& kernel, const Tensor<T>& bias) {
  if (input.rank() != 3 || kernel.rank() != 3 || bias.rank() != 1) {
    throw ShapeError("conv1d_same: expected [B x T x Cin], [k x Cin x Cout], [Cout]; got " +
                     shape_str(input.shape()) + ", " + shape_str(kernel.shape()) + ", " +
                     shape_str(bias.shape()));
  }
  const std::size_t B = input.dim(0), steps = input.dim(1), cin = input.dim(2);
  const std::size_t k = kernel.dim(0), cout = kernel.dim(2);
  if (kernel.dim(1) != cin || bias.dim(0) != cout) {
    throw ShapeError("conv1d_same: channel mismatch, input " + shape_str(input.shape()) +
                     " kernel " + shape_str(kernel.shape()) + " bias " + shape_str(bias.shape()));
  }
  if (k % 2 == 0) throw ShapeError("conv1d_same: kernel length must be odd");
  const std::size_t half = k / 2;
  const std::size_t rows = B * steps, width = k * cin;

  // cols[(b,t), (i,c)] = input[b, t + i - half, c], zero outside.
  std::vector<T> cols(rows * width, T{0});
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t i = 0; i < k; ++i) {
        const long src = static_cast<long>(t + i) - static_cast<long>(half);
        if (src < 0 || src >= static_cast<long>(steps)) continue;
        std::copy_n(input.data().data() + (b * steps + src) * cin, cin,
                    cols.data() + (b * steps + t) * width + i * cin);
      }

  Tensor<T> out({B, steps, cout});
  kernels::gemm<T>(cols, kernel.data(), out.data(), rows, width, cout);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t o = 0; o < cout; ++o) out[r * cout + o] += bias[o];
  check_finite(out, "conv1d_same");

  record<T>("conv1d_same", {input, kernel, bias}, out,
            [input, kernel, bias, out, cols = std::move(cols), B, steps, cin, k, cout, half,
             rows, width]() mutable {
              auto g = out.grad();
              if (kernel.requires_grad())
                kernels::gemm_tn<T>(cols, g, kernel.grad(), width, rows, cout, true);
              if (bias.requires_grad()) {
                auto gb = bias.grad();
                for (std::size_t r = 0; r < rows; ++r)
                  for (std::size_t o = 0; o < cout; ++o) gb[o] += g[r * cout + o];
              }
              if (input.requires_grad()) {
                std::vector<T> dcols(rows * width);
                kernels::gemm_nt<T>(g, kernel.data(), dcols, rows, cout, width);
                auto gx = input.grad();
                for (std::size_t b = 0; b < B; ++b)
                  for (std::size_t t = 0; t < steps; ++t)
                    for (std::size_t i = 0; i < k; ++i) {
                      const long src = static_cast<long>(t + i) - static_cast<long>(half);
                      if (src < 0 || src >= static_cast<long>(steps)) continue;
                      const T* d = dcols.data() + (b * steps + t) * width + i * cin;
                      T* dst = gx.data() + (b * steps + src) * cin;
                      for (std::size_t c = 0; c < cin; ++c) dst[c] += d[c];
                    }
              }
            });
  return out;
}

template <class T>
Tensor<T> batchnorm(const Tensor<T>& input, BatchNormParams<T>& params, Mode mode,
                    double eps, double momentum) {
  if (input.rank() != 3 || params.gamma.rank() != 1 || params.gamma.dim(0) != input.dim(2)) {
    throw ShapeError("batchnorm: input " + shape_str(input.shape()) + " vs gamma " +
                     shape_str(params.gamma.shape()));
  }
  const std::size_t C = input.dim(2);
  const std::size_t count = input.size() / C;
  if (mode == Mode::train && input.dim(0) < 2) {
    throw std::invalid_argument("batchnorm: train mode needs a batch of at least 2");
  }

  std::vector<T> mean(C, T{0}), inv_std(C);
  if (mode == Mode::train) {
    std::vector<T> var(C, T{0});
    for (std::size_t r = 0; r < count; ++r)
      for (std::size_t c = 0; c < C; ++c) mean[c] += input[r * C + c];
    for (T& m : mean) m /= static_cast<T>(count);
    for (std::size_t r = 0; r < count; ++r)
      for (std::size_t c = 0; c < C; ++c) {
        const T d = input[r * C + c] - mean[c];
        var[c] += d * d;
      }
    for (std::size_t c = 0; c < C; ++c) {
      var[c] /= static_cast<T>(count);
      inv_std[c] = T{1} / std::sqrt(var[c] + static_cast<T>(eps));
      const T mom = static_cast<T>(momentum);
      params.running_mean[c] = mom * params.running_mean[c] + (T{1} - mom) * mean[c];
      params.running_var[c] = mom * params.running_var[c] + (T{1} - mom) * var[c];
    }
  } else {
    for (std::size_t c = 0; c < C; ++c) {
      mean[c] = params.running_mean[c];
      inv_std[c] = T{1} / std::sqrt(params.running_var[c] + static_cast<T>(eps));
    }
  }

  Tensor<T> xhat(input.shape());
  Tensor<T> out(input.shape());
  for (std::size_t r = 0; r < count; ++r)
    for (std::size_t c = 0; c < C; ++c) {
      const std::size_t i = r * C + c;
      xhat[i] = (input[i] - mean[c]) * inv_std[c];
      out[i] = params.gamma[c] * xhat[i] + params.beta[c];
    }
  check_finite(out, "batchnorm");

  const Tensor<T> gamma = params.gamma, beta = params.beta;
  const bool batch_stats = mode == Mode::train;
  record<T>("batchnorm", {input, gamma, beta}, out,
            [input, gamma, beta, out, xhat, inv_std = std::move(inv_std), C, count,
             batch_stats]() mutable {
              auto g = out.grad();
              std::vector<T> sum_g(C, T{0}), sum_gx(C, T{0});
              for (std::size_t r = 0; r < count; ++r)
                for (std::size_t c = 0; c < C; ++c) {
                  sum_g[c] += g[r * C + c];
                  sum_gx[c] += g[r * C + c] * xhat[r * C + c];
                }
              if (gamma.requires_grad())
                for (std::size_t c = 0; c < C; ++c) gamma.grad()[c] += sum_gx[c];
              if (beta.requires_grad())
                for (std::size_t c = 0; c < C; ++c) beta.grad()[c] += sum_g[c];
              if (!input.requires_grad()) return;
              auto gx = input.grad();
              const T n = static_cast<T>(count);
              for (std::size_t r = 0; r < count; ++r)
                for (std::size_t c = 0; c < C; ++c) {
                  const std::size_t i = r * C + c;
                  if (batch_stats) {
                    gx[i] += gamma[c] * inv_std[c] / n *
                             (n * g[i] - sum_g[c] - xhat[i] * sum_gx[c]);
                  } else {
                    gx[i] += g[i] * gamma[c] * inv_std[c];
                  }
                }
            });
  return out;
}

template <class T>
Tensor<T> maxpool1d(const Tensor<T>& input, std::size_t pool, std::size_t stride) {
  if (input.rank() != 3) throw ShapeError("maxpool1d: expected [B x T x C]");
  if (pool == 0 || stride == 0) throw std::invalid_argument("maxpool1d: zero window");
  const std::size_t B = input.dim(0), steps = input.dim(1), C = input.dim(2);
  if (steps < pool) {
    throw ShapeError("maxpool1d: sequence length " + std::to_string(steps) +
                     " shorter than pool " + std::to_string(pool));
  }
  const std::size_t out_steps = (steps - pool) / stride + 1;
  Tensor<T> out({B, out_steps, C});
  std::vector<std::size_t> argmax(out.size());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < out_steps; ++t)
      for (std::size_t c = 0; c < C; ++c) {
        std::size_t best = (b * steps + t * stride) * C + c;
        for (std::size_t w = 1; w < pool; ++w) {
          const std::size_t idx = (b * steps + t * stride + w) * C + c;
          if (input[idx] > input[best]) best = idx;
        }
        const std::size_t o = (b * out_steps + t) * C + c;
        out[o] = input[best];
        argmax[o] = best;
      }
  record<T>("maxpool1d", {input}, out, [input, out, argmax = std::move(argmax)]() mutable {
    auto g = out.grad();
    auto gx = input.grad();
    for (std::size_t o = 0; o < g.size(); ++o) gx[argmax[o]] += g[o];
  });
  return out;
}

template <class T>
Tensor<T> dense(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  return ops::add_bias(ops::matmul(x, weight), bias);
}

template <class T>
SeOutput<T> se_residual_attention(const Tensor<T>& features, const SeParams<T>& params,
                                  bool residual) {
  if (features.rank() != 3 || params.w1.rank() != 2 ||
      features.dim(2) != params.w1.dim(0) || params.w2.dim(1) != features.dim(2)) {
    throw ShapeError("se_residual_attention: features " + shape_str(features.shape()) +
                     " vs bottleneck " + shape_str(params.w1.shape()) + "/" +
                     shape_str(params.w2.shape()));
  }
  const Tensor<T> squeeze = ops::reduce(features, ops::Reduction::mean, 1);
  const Tensor<T> hidden = ops::relu(dense(squeeze, params.w1, params.b1));
  const Tensor<T> attention = ops::sigmoid(dense(hidden, params.w2, params.b2));
  Tensor<T> scaled = ops::scale_channels(features, attention);
  if (residual) scaled = ops::add(scaled, features);
  return {scaled, attention};
}

template <class T>
Tensor<T> lstm(const Tensor<T>& input, const LstmParams<T>& params, bool reverse) {
  if (input.rank() != 3 || params.weight.rank() != 2 || params.weight.dim(0) % 4 != 0) {
    throw ShapeError("lstm: input " + shape_str(input.shape()) + " weight " +
                     shape_str(params.weight.shape()));
  }
  const std::size_t B = input.dim(0), steps = input.dim(1), D = input.dim(2);
  const std::size_t H = params.weight.dim(0) / 4;
  if (params.weight.dim(1) != D + H || params.bias.rank() != 1 || params.bias.dim(0) != 4 * H) {
    throw ShapeError("lstm: width mismatch, input " + shape_str(input.shape()) + " weight " +
                     shape_str(params.weight.shape()) + " bias " + shape_str(params.bias.shape()));
  }
  Tensor<T> h({B, H});
  Tensor<T> c({B, H});
  std::vector<Tensor<T>> outputs(steps);
  for (std::size_t n = 0; n < steps; ++n) {
    const std::size_t t = reverse ? steps - 1 - n : n;
    const Tensor<T> xh = ops::concat_last(ops::select_time(input, t), h);
    const Tensor<T> z = ops::add_bias(ops::matmul_nt(xh, params.weight), params.bias);
    const Tensor<T> i = ops::sigmoid(ops::slice_last(z, 0, H));
    const Tensor<T> f = ops::sigmoid(ops::slice_last(z, H, H));
    const Tensor<T> g = ops::tanh(ops::slice_last(z, 2 * H, H));
    const Tensor<T> o = ops::sigmoid(ops::slice_last(z, 3 * H, H));
    c = ops::add(ops::mul(f, c), ops::mul(i, g));
    h = ops::mul(o, ops::tanh(c));
    outputs[t] = h;
  }
  return ops::stack_time(outputs);
}

template <class T>
Tensor<T> bilstm(const Tensor<T>& input, const BiLstmParams<T>& params) {
  return ops::concat_last(lstm(input, params.forward, false), lstm(input, params.backward, true));
}

#define PAPERNET_INSTANTIATE(T)                                                          \
  template Tensor<T> conv1d_same(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);  \
  template Tensor<T> batchnorm(const Tensor<T>&, BatchNormParams<T>&, Mode, double,      \
                               double);                                                  \
  template Tensor<T> maxpool1d(const Tensor<T>&, std::size_t, std::size_t);              \
  template Tensor<T> dense(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);        \
  template SeOutput<T> se_residual_attention(const Tensor<T>&, const SeParams<T>&, bool); \
  template Tensor<T> lstm(const Tensor<T>&, const LstmParams<T>&, bool);                 \
  template Tensor<T> bilstm(const Tensor<T>&, const BiLstmParams<T>&);

PAPERNET_INSTANTIATE(float)
PAPERNET_INSTANTIATE(double)
#undef PAPERNET_INSTANTIATE

}  // namespace papernet
