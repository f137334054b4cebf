// SPDX-License-Identifier: Apache-2.0
#include "papernet/ops.hpp"

#include <algorithm>
#include <cmath>

#include "papernet/kernels.hpp"
#include "papernet/op_record.hpp"

namespace papernet::ops {

using detail::record;

template <class T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    throw ShapeError("matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out({m, n});
  kernels::gemm<T>(a.data(), b.data(), out.data(), m, k, n);
  check_finite(out, "matmul");
  record<T>("matmul", {a, b}, out, [a, b, out, m, k, n]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) kernels::gemm_nt<T>(g, b.data(), a.grad(), m, n, k, true);
    if (b.requires_grad()) kernels::gemm_tn<T>(a.data(), g, b.grad(), k, m, n, true);
  });
  return out;
}

template <class T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(1)) {
    throw ShapeError("matmul_nt: " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()) + "^T");
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
  Tensor<T> out({m, n});
  kernels::gemm_nt<T>(a.data(), b.data(), out.data(), m, k, n);
  check_finite(out, "matmul_nt");
  record<T>("matmul_nt", {a, b}, out, [a, b, out, m, k, n]() mutable {
    auto g = out.grad();
    // dA = G * B, dB = G^T * A
    if (a.requires_grad()) kernels::gemm<T>(g, b.data(), a.grad(), m, n, k, true);
    if (b.requires_grad()) kernels::gemm_tn<T>(g, a.data(), b.grad(), n, m, k, true);
  });
  return out;
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  check_finite(out, "add");
  record<T>("add", {a, b}, out, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i];
    if (b.requires_grad()) for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i];
  });
  return out;
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mul: " + shape_str(a.shape()) + " vs " + shape_str(b.shape()));
  }
  Tensor<T> out(a.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  check_finite(out, "mul");
  record<T>("mul", {a, b}, out, [a, b, out]() mutable {
    auto g = out.grad();
    if (a.requires_grad()) for (std::size_t i = 0; i < g.size(); ++i) a.grad()[i] += g[i] * b[i];
    if (b.requires_grad()) for (std::size_t i = 0; i < g.size(); ++i) b.grad()[i] += g[i] * a[i];
  });
  return out;
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * factor;
  check_finite(out, "scale");
  record<T>("scale", {x}, out, [x, out, factor]() mutable {
    auto g = out.grad();
    for (std::size_t i = 0; i < g.size(); ++i) x.grad()[i] += g[i] * factor;
  });
  return out;
}

template <class T>
Tensor<T> add_bias(const Tensor<T>& x, const Tensor<T>& bias) {
  if (bias.rank() != 1 || x.rank() == 0 || x.shape().back() != bias.dim(0)) {
    throw ShapeError("add_bias: " + shape_str(x.shape()) + " + " + shape_str(bias.shape()));
  }
  const std::size_t n = bias.dim(0);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + bias[i % n];
  check_finite(out, "add_bias");
  record<T>("add_bias", {x, bias}, out, [x, bias, out, n]() mutable {
    auto g = out.grad();
    if (x.requires_grad()) for (std::size_t i = 0; i < g.size(); ++i) x.grad()[i] += g[i];
    if (bias.requires_grad()) {
      auto gb = bias.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i % n] += g[i];
    }
  });
  return out;
}

namespace {

template <class T, class Fwd, class Deriv>
Tensor<T> unary(const char* name, const Tensor<T>& x, Fwd fwd, Deriv deriv) {
  check_finite(x, name);
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  check_finite(out, name);
  // deriv(x, y) -> dy/dx
  record<T>(name, {x}, out, [x, out, deriv]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * deriv(x[i], out[i]);
  });
  return out;
}

}  // namespace

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  return unary<T>(
      "relu", x, [](T v) { return v > T{0} ? v : T{0}; },
      [](T v, T) { return v > T{0} ? T{1} : T{0}; });
}

template <class T>
Tensor<T> sigmoid(const Tensor<T>& x) {
  return unary<T>(
      "sigmoid", x,
      [](T v) {
        // split on sign so exp never overflows
        if (v >= T{0}) return T{1} / (T{1} + std::exp(-v));
        const T e = std::exp(v);
        return e / (T{1} + e);
      },
      [](T, T y) { return y * (T{1} - y); });
}

template <class T>
Tensor<T> tanh(const Tensor<T>& x) {
  return unary<T>(
      "tanh", x, [](T v) { return std::tanh(v); },
      [](T, T y) { return T{1} - y * y; });
}

template <class T>
Tensor<T> softmax(const Tensor<T>& x) {
  if (x.rank() == 0 || x.shape().back() == 0) {
    throw ShapeError("softmax: empty last axis in " + shape_str(x.shape()));
  }
  check_finite(x, "softmax");
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Tensor<T> out(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const T* in = x.data().data() + r * n;
    T* o = out.data().data() + r * n;
    const T mx = *std::max_element(in, in + n);
    T total{0};
    for (std::size_t j = 0; j < n; ++j) {
      o[j] = std::exp(in[j] - mx);
      total += o[j];
    }
    for (std::size_t j = 0; j < n; ++j) o[j] /= total;
  }
  record<T>("softmax", {x}, out, [x, out, n, rows]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      T dot{0};
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * out[r * n + j];
      for (std::size_t j = 0; j < n; ++j)
        gx[r * n + j] += out[r * n + j] * (g[r * n + j] - dot);
    }
  });
  return out;
}

template <class T>
Tensor<T> activation(const Tensor<T>& x, Activation kind) {
  switch (kind) {
    case Activation::relu: return relu(x);
    case Activation::sigmoid: return sigmoid(x);
    case Activation::tanh: return ops::tanh(x);
    case Activation::softmax: return softmax(x);
  }
  throw std::invalid_argument("activation: unknown kind");
}

template <class T>
Tensor<T> reduce(const Tensor<T>& x, Reduction kind, std::size_t axis) {
  if (axis >= x.rank()) {
    throw ShapeError("reduce: axis " + std::to_string(axis) + " invalid for " +
                     shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  const std::size_t len = s[axis];
  if (len == 0) throw ShapeError("reduce: empty axis in " + shape_str(s));
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  Shape out_shape;
  for (std::size_t i = 0; i < s.size(); ++i)
    if (i != axis) out_shape.push_back(s[i]);
  Tensor<T> out(out_shape);
  std::vector<std::size_t> argmax;
  if (kind == Reduction::max) argmax.resize(outer * inner);

  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      const std::size_t base = o * len * inner + in;
      if (kind == Reduction::max) {
        std::size_t best = 0;
        T bv = x[base];
        for (std::size_t l = 1; l < len; ++l) {
          if (x[base + l * inner] > bv) {
            bv = x[base + l * inner];
            best = l;
          }
        }
        out[o * inner + in] = bv;
        argmax[o * inner + in] = best;
      } else {
        T acc{0};
        for (std::size_t l = 0; l < len; ++l) acc += x[base + l * inner];
        out[o * inner + in] = kind == Reduction::mean ? acc / static_cast<T>(len) : acc;
      }
    }
  }
  check_finite(out, "reduce");
  record<T>("reduce", {x}, out,
            [x, out, kind, len, outer, inner, argmax = std::move(argmax)]() mutable {
              auto g = out.grad();
              auto gx = x.grad();
              for (std::size_t o = 0; o < outer; ++o) {
                for (std::size_t in = 0; in < inner; ++in) {
                  const std::size_t base = o * len * inner + in;
                  const T go = g[o * inner + in];
                  if (kind == Reduction::max) {
                    gx[base + argmax[o * inner + in] * inner] += go;
                  } else {
                    const T v = kind == Reduction::mean ? go / static_cast<T>(len) : go;
                    for (std::size_t l = 0; l < len; ++l) gx[base + l * inner] += v;
                  }
                }
              }
            });
  return out;
}

template <class T>
Tensor<T> sum_all(const Tensor<T>& x) {
  T acc{0};
  for (T v : x.data()) acc += v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out, "sum_all");
  record<T>("sum_all", {x}, out, [x, out]() mutable {
    const T g = out.grad()[0];
    for (T& v : x.grad()) v += g;
  });
  return out;
}

template <class T>
Tensor<T> sum_squares(const Tensor<T>& x) {
  T acc{0};
  for (T v : x.data()) acc += v * v;
  Tensor<T> out = Tensor<T>::scalar(acc);
  check_finite(out, "sum_squares");
  record<T>("sum_squares", {x}, out, [x, out]() mutable {
    const T g = out.grad()[0];
    auto gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += T{2} * x[i] * g;
  });
  return out;
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  if (numel(shape) != x.size()) {
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  Tensor<T> out(std::move(shape), std::vector<T>(x.data().begin(), x.data().end()));
  record<T>("reshape", {x}, out, [x, out]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
  return out;
}

template <class T>
Tensor<T> concat_last(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() == 0 || a.rank() != b.rank() ||
      !std::equal(a.shape().begin(), a.shape().end() - 1, b.shape().begin())) {
    throw ShapeError("concat_last: " + shape_str(a.shape()) + " | " + shape_str(b.shape()));
  }
  const std::size_t na = a.shape().back(), nb = b.shape().back();
  const std::size_t rows = a.size() / std::max<std::size_t>(na, 1);
  Shape s = a.shape();
  s.back() = na + nb;
  Tensor<T> out(s);
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * na, na, out.data().data() + r * (na + nb));
    std::copy_n(b.data().data() + r * nb, nb, out.data().data() + r * (na + nb) + na);
  }
  record<T>("concat_last", {a, b}, out, [a, b, out, na, nb, rows]() mutable {
    auto g = out.grad();
    for (std::size_t r = 0; r < rows; ++r) {
      if (a.requires_grad())
        for (std::size_t j = 0; j < na; ++j) a.grad()[r * na + j] += g[r * (na + nb) + j];
      if (b.requires_grad())
        for (std::size_t j = 0; j < nb; ++j) b.grad()[r * nb + j] += g[r * (na + nb) + na + j];
    }
  });
  return out;
}

template <class T>
Tensor<T> slice_last(const Tensor<T>& x, std::size_t begin, std::size_t len) {
  if (x.rank() == 0 || begin + len > x.shape().back()) {
    throw ShapeError("slice_last: [" + std::to_string(begin) + ", +" +
                     std::to_string(len) + ") out of " + shape_str(x.shape()));
  }
  const std::size_t n = x.shape().back();
  const std::size_t rows = x.size() / n;
  Shape s = x.shape();
  s.back() = len;
  Tensor<T> out(s);
  for (std::size_t r = 0; r < rows; ++r)
    std::copy_n(x.data().data() + r * n + begin, len, out.data().data() + r * len);
  record<T>("slice_last", {x}, out, [x, out, n, rows, begin, len]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t j = 0; j < len; ++j) gx[r * n + begin + j] += g[r * len + j];
  });
  return out;
}

template <class T>
Tensor<T> select_time(const Tensor<T>& x, std::size_t t) {
  if (x.rank() != 3 || t >= x.dim(1)) {
    throw ShapeError("select_time: step " + std::to_string(t) + " of " + shape_str(x.shape()));
  }
  const std::size_t B = x.dim(0), steps = x.dim(1), D = x.dim(2);
  Tensor<T> out({B, D});
  for (std::size_t b = 0; b < B; ++b)
    std::copy_n(x.data().data() + (b * steps + t) * D, D, out.data().data() + b * D);
  record<T>("select_time", {x}, out, [x, out, B, steps, D, t]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t d = 0; d < D; ++d) gx[(b * steps + t) * D + d] += g[b * D + d];
  });
  return out;
}

template <class T>
Tensor<T> stack_time(const std::vector<Tensor<T>>& steps) {
  if (steps.empty()) throw ShapeError("stack_time: no steps");
  const Shape& s0 = steps.front().shape();
  if (s0.size() != 2) throw ShapeError("stack_time: steps must be [B x D]");
  for (const auto& s : steps)
    if (s.shape() != s0) throw ShapeError("stack_time: ragged steps");
  const std::size_t B = s0[0], D = s0[1], n = steps.size();
  Tensor<T> out({B, n, D});
  for (std::size_t t = 0; t < n; ++t)
    for (std::size_t b = 0; b < B; ++b)
      std::copy_n(steps[t].data().data() + b * D, D, out.data().data() + (b * n + t) * D);
  record<T>("stack_time", steps, out, [steps, out, B, D, n]() mutable {
    auto g = out.grad();
    for (std::size_t t = 0; t < n; ++t) {
      if (!steps[t].requires_grad()) continue;
      auto gs = steps[t].grad();
      for (std::size_t b = 0; b < B; ++b)
        for (std::size_t d = 0; d < D; ++d) gs[b * D + d] += g[(b * n + t) * D + d];
    }
  });
  return out;
}

template <class T>
Tensor<T> scale_channels(const Tensor<T>& f, const Tensor<T>& a) {
  if (f.rank() != 3 || a.rank() != 2 || a.dim(0) != f.dim(0) || a.dim(1) != f.dim(2)) {
    throw ShapeError("scale_channels: " + shape_str(f.shape()) + " * " + shape_str(a.shape()));
  }
  const std::size_t B = f.dim(0), steps = f.dim(1), C = f.dim(2);
  Tensor<T> out(f.shape());
  for (std::size_t b = 0; b < B; ++b)
    for (std::size_t t = 0; t < steps; ++t)
      for (std::size_t c = 0; c < C; ++c)
        out[(b * steps + t) * C + c] = f[(b * steps + t) * C + c] * a[b * C + c];
  check_finite(out, "scale_channels");
  record<T>("scale_channels", {f, a}, out, [f, a, out, B, steps, C]() mutable {
    auto g = out.grad();
    for (std::size_t b = 0; b < B; ++b)
      for (std::size_t t = 0; t < steps; ++t)
        for (std::size_t c = 0; c < C; ++c) {
          const std::size_t i = (b * steps + t) * C + c;
          if (f.requires_grad()) f.grad()[i] += g[i] * a[b * C + c];
          if (a.requires_grad()) a.grad()[b * C + c] += g[i] * f[i];
        }
  });
  return out;
}

template <class T>
Tensor<T> dropout(const Tensor<T>& x, double p, bool training, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout: p must be in [0, 1), got " + std::to_string(p));
  }
  if (!training || p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  const T survivor_scale = static_cast<T>(1.0 / (1.0 - p));
  std::vector<T> mask(x.size());
  for (T& m : mask) m = keep(rng) ? survivor_scale : T{0};
  Tensor<T> out(x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  record<T>("dropout", {x}, out, [x, out, mask = std::move(mask)]() mutable {
    auto g = out.grad();
    auto gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * mask[i];
  });
  return out;
}

template <class T>
Tensor<T> weighted_nll(const Tensor<T>& probs, std::span<const int> labels,
                       std::span<const double> class_weights) {
  if (probs.rank() != 2 || probs.dim(0) != labels.size() ||
      probs.dim(1) != class_weights.size()) {
    throw ShapeError("weighted_nll: probs " + shape_str(probs.shape()) + ", " +
                     std::to_string(labels.size()) + " labels, " +
                     std::to_string(class_weights.size()) + " class weights");
  }
  const std::size_t B = probs.dim(0), K = probs.dim(1);
  if (B == 0) throw ShapeError("weighted_nll: empty batch");
  constexpr T kFloor = static_cast<T>(1e-12);
  std::vector<int> y(labels.begin(), labels.end());
  std::vector<double> w(class_weights.begin(), class_weights.end());
  T acc{0};
  for (std::size_t i = 0; i < B; ++i) {
    if (y[i] < 0 || static_cast<std::size_t>(y[i]) >= K) {
      throw std::out_of_range("weighted_nll: label " + std::to_string(y[i]) + " out of range");
    }
    const T p = probs[i * K + y[i]];
    acc -= static_cast<T>(w[y[i]]) * std::log(std::max(p, kFloor));
  }
  Tensor<T> out = Tensor<T>::scalar(acc / static_cast<T>(B));
  check_finite(out, "weighted_nll");
  record<T>("weighted_nll", {probs}, out,
            [probs, out, B, K, y = std::move(y), w = std::move(w), kFloor]() mutable {
              const T g = out.grad()[0] / static_cast<T>(B);
              auto gp = probs.grad();
              for (std::size_t i = 0; i < B; ++i) {
                const T p = probs[i * K + y[i]];
                if (p > kFloor) gp[i * K + y[i]] -= g * static_cast<T>(w[y[i]]) / p;
              }
            });
  return out;
}

#define PAPERNET_INSTANTIATE(T)                                                        \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                       \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                    \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                          \
  template Tensor<T> scale(const Tensor<T>&, T);                                       \
  template Tensor<T> add_bias(const Tensor<T>&, const Tensor<T>&);                     \
  template Tensor<T> relu(const Tensor<T>&);                                           \
  template Tensor<T> sigmoid(const Tensor<T>&);                                        \
  template Tensor<T> tanh(const Tensor<T>&);                                           \
  template Tensor<T> softmax(const Tensor<T>&);                                        \
  template Tensor<T> activation(const Tensor<T>&, Activation);                         \
  template Tensor<T> reduce(const Tensor<T>&, Reduction, std::size_t);                 \
  template Tensor<T> sum_all(const Tensor<T>&);                                        \
  template Tensor<T> sum_squares(const Tensor<T>&);                                    \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                 \
  template Tensor<T> concat_last(const Tensor<T>&, const Tensor<T>&);                  \
  template Tensor<T> slice_last(const Tensor<T>&, std::size_t, std::size_t);           \
  template Tensor<T> select_time(const Tensor<T>&, std::size_t);                       \
  template Tensor<T> stack_time(const std::vector<Tensor<T>>&);                        \
  template Tensor<T> scale_channels(const Tensor<T>&, const Tensor<T>&);               \
  template Tensor<T> dropout(const Tensor<T>&, double, bool, std::mt19937_64&);        \
  template Tensor<T> weighted_nll(const Tensor<T>&, std::span<const int>,              \
                                  std::span<const double>);

PAPERNET_INSTANTIATE(float)
PAPERNET_INSTANTIATE(double)
#undef PAPERNET_INSTANTIATE

}  // namespace papernet::ops
