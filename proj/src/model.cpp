// SPDX-License-Identifier: Apache-2.0
#include "papernet/model.hpp"

#include <cmath>
#include <stdexcept>

namespace papernet {

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::full: return "full";
    case Variant::no_attention: return "no_attention";
    case Variant::no_lstm: return "no_lstm";
    case Variant::no_residual: return "no_residual";
  }
  return "unknown";
}

Variant parse_variant(std::string_view name) {
  std::string n(name);
  for (char& ch : n)
    if (ch == '-') ch = '_';
  for (Variant v : kAllVariants)
    if (n == to_string(v)) return v;
  throw std::invalid_argument("unknown model variant '" + std::string(name) +
                              "' (expected full, no_attention, no_lstm, no_residual)");
}

namespace {

template <class T>
Tensor<T> glorot(Shape shape, std::size_t fan_in, std::size_t fan_out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> u(-limit, limit);
  Tensor<T> t(std::move(shape));
  for (T& v : t.data()) v = static_cast<T>(u(rng));
  return t;
}

template <class T>
Tensor<T> conv_kernel(std::size_t k, std::size_t cin, std::size_t cout, std::mt19937_64& rng) {
  return glorot<T>({k, cin, cout}, k * cin, k * cout, rng);
}

template <class T>
BatchNormParams<T> make_batchnorm(std::size_t channels) {
  return {Tensor<T>({channels}, T{1}), Tensor<T>({channels}, T{0}),
          Tensor<T>({channels}, T{0}), Tensor<T>({channels}, T{1})};
}

template <class T>
LstmParams<T> make_lstm(std::size_t input, std::size_t hidden, std::mt19937_64& rng) {
  LstmParams<T> p{glorot<T>({4 * hidden, input + hidden}, input + hidden, 4 * hidden, rng),
                  Tensor<T>({4 * hidden}, T{0})};
  for (std::size_t j = hidden; j < 2 * hidden; ++j) p.bias[j] = T{1};  // forget gate
  return p;
}

}  // namespace

template <class T>
Model<T>::Model(Variant variant, std::size_t num_classes, std::size_t input_length,
                std::uint64_t seed)
    : variant_(variant),
      num_classes_(num_classes),
      input_length_(input_length),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL) {
  if (num_classes < 2) throw std::invalid_argument("model: need at least 2 classes");
  if (input_length < 2) throw std::invalid_argument("model: input length must be >= 2");

  std::mt19937_64 init(seed);
  conv1_k_ = conv_kernel<T>(5, 1, kConv1Filters, init);
  conv1_b_ = Tensor<T>({kConv1Filters});
  bn1_ = make_batchnorm<T>(kConv1Filters);
  conv2_k_ = conv_kernel<T>(5, kConv1Filters, kConv2Filters, init);
  conv2_b_ = Tensor<T>({kConv2Filters});
  bn2_ = make_batchnorm<T>(kConv2Filters);
  conv3_k_ = conv_kernel<T>(3, kConv2Filters, kConv3Filters, init);
  conv3_b_ = Tensor<T>({kConv3Filters});
  bn3_ = make_batchnorm<T>(kConv3Filters);

  if (has_attention()) {
    SeParams<T> se;
    se.w1 = glorot<T>({kConv3Filters, kSeBottleneck}, kConv3Filters, kSeBottleneck, init);
    se.b1 = Tensor<T>({kSeBottleneck});
    se.w2 = glorot<T>({kSeBottleneck, kConv3Filters}, kSeBottleneck, kConv3Filters, init);
    se.b2 = Tensor<T>({kConv3Filters});
    se_ = std::move(se);
  }
  std::size_t pooled_width = kConv3Filters;
  if (has_lstm()) {
    BiLstmParams<T> lstm;
    lstm.forward = make_lstm<T>(kConv3Filters, kLstmHidden, init);
    lstm.backward = make_lstm<T>(kConv3Filters, kLstmHidden, init);
    lstm_ = std::move(lstm);
    pooled_width = 2 * kLstmHidden;
  }
  dense1_w_ = glorot<T>({pooled_width, kDenseUnits}, pooled_width, kDenseUnits, init);
  dense1_b_ = Tensor<T>({kDenseUnits});
  dense2_w_ = glorot<T>({kDenseUnits, num_classes}, kDenseUnits, num_classes, init);
  dense2_b_ = Tensor<T>({num_classes});
  for (auto& p : trainable_parameters()) p.tensor.set_requires_grad(true);
}

template <class T>
void Model<T>::set_dropout_rate(double p) {
  if (!(p >= 0.0 && p < 1.0)) throw std::invalid_argument("dropout rate must be in [0, 1)");
  dropout_ = p;
}

template <class T>
Tensor<T> Model<T>::forward(const Tensor<T>& batch, Mode mode, std::mt19937_64* rng,
                            ForwardTrace<T>* trace) {
  Tensor<T> x = batch;
  if (x.rank() == 2) x = ops::reshape(x, {x.dim(0), x.dim(1), 1});
  if (x.rank() != 3 || x.dim(1) != input_length_ || x.dim(2) != 1 || x.dim(0) == 0) {
    throw ShapeError("forward: expected [B x " + std::to_string(input_length_) +
                     " x 1], got " + shape_str(batch.shape()));
  }
  ForwardTrace<T> local;
  ForwardTrace<T>& tr = trace ? *trace : local;

  tr.conv1 = ops::relu(conv1d_same(x, conv1_k_, conv1_b_));
  tr.bn1 = batchnorm(tr.conv1, bn1_, mode);
  tr.conv2 = ops::relu(conv1d_same(tr.bn1, conv2_k_, conv2_b_));
  tr.bn2 = batchnorm(tr.conv2, bn2_, mode);
  tr.pool = maxpool1d(tr.bn2, 2, 2);
  tr.conv3 = ops::relu(conv1d_same(tr.pool, conv3_k_, conv3_b_));
  tr.bn3 = batchnorm(tr.conv3, bn3_, mode);
  tr.encoded = tr.bn3;

  if (se_) {
    SeOutput<T> se = se_residual_attention(tr.encoded, *se_, variant_ != Variant::no_residual);
    tr.attended = se.features;
    tr.attention = se.attention;
  } else {
    tr.attended = tr.encoded;
  }

  if (lstm_) {
    tr.recurrent = bilstm(tr.attended, *lstm_);
    tr.pooled = ops::reduce(tr.recurrent, ops::Reduction::max, 1);
  } else {
    tr.pooled = ops::reduce(tr.attended, ops::Reduction::mean, 1);
  }

  tr.dense1 = ops::relu(dense(tr.pooled, dense1_w_, dense1_b_));
  tr.dropped = dropout(tr.dense1, dropout_, mode, rng ? *rng : rng_);
  tr.probs = ops::softmax(dense(tr.dropped, dense2_w_, dense2_b_));
  return tr.probs;
}

template <class T>
std::vector<NamedParam<T>> Model<T>::parameters() const {
  std::vector<NamedParam<T>> out;
  auto add = [&](std::string name, ParamKind kind, const Tensor<T>& t) {
    out.push_back({std::move(name), kind, t});
  };
  auto add_bn = [&](const std::string& prefix, const BatchNormParams<T>& bn) {
    add(prefix + ".gamma", ParamKind::norm, bn.gamma);
    add(prefix + ".beta", ParamKind::norm, bn.beta);
    add(prefix + ".running_mean", ParamKind::running_stat, bn.running_mean);
    add(prefix + ".running_var", ParamKind::running_stat, bn.running_var);
  };
  add("conv1.kernel", ParamKind::weight, conv1_k_);
  add("conv1.bias", ParamKind::bias, conv1_b_);
  add_bn("bn1", bn1_);
  add("conv2.kernel", ParamKind::weight, conv2_k_);
  add("conv2.bias", ParamKind::bias, conv2_b_);
  add_bn("bn2", bn2_);
  add("conv3.kernel", ParamKind::weight, conv3_k_);
  add("conv3.bias", ParamKind::bias, conv3_b_);
  add_bn("bn3", bn3_);
  if (se_) {
    add("se.w1", ParamKind::weight, se_->w1);
    add("se.b1", ParamKind::bias, se_->b1);
    add("se.w2", ParamKind::weight, se_->w2);
    add("se.b2", ParamKind::bias, se_->b2);
  }
  if (lstm_) {
    add("lstm.forward.weight", ParamKind::weight, lstm_->forward.weight);
    add("lstm.forward.bias", ParamKind::bias, lstm_->forward.bias);
    add("lstm.backward.weight", ParamKind::weight, lstm_->backward.weight);
    add("lstm.backward.bias", ParamKind::bias, lstm_->backward.bias);
  }
  add("dense1.weight", ParamKind::weight, dense1_w_);
  add("dense1.bias", ParamKind::bias, dense1_b_);
  add("dense2.weight", ParamKind::weight, dense2_w_);
  add("dense2.bias", ParamKind::bias, dense2_b_);
  return out;
}

template <class T>
std::vector<NamedParam<T>> Model<T>::trainable_parameters() const {
  std::vector<NamedParam<T>> out;
  for (auto& p : parameters())
    if (p.trainable()) out.push_back(std::move(p));
  return out;
}

template <class T>
std::vector<Tensor<T>> Model<T>::regularized_weights() const {
  std::vector<Tensor<T>> out;
  for (auto& p : parameters())
    if (p.kind == ParamKind::weight) out.push_back(p.tensor);
  return out;
}

template <class T>
std::size_t Model<T>::count_parameters() const {
  std::size_t n = 0;
  for (const auto& p : parameters())
    if (p.trainable()) n += p.tensor.size();
  return n;
}

template <class T>
std::size_t Model<T>::count_nontrainable() const {
  std::size_t n = 0;
  for (const auto& p : parameters())
    if (!p.trainable()) n += p.tensor.size();
  return n;
}

template <class T>
Model<T> Model<T>::clone() const {
  return cast<T>();
}

template <class T>
template <class U>
Model<U> Model<T>::cast() const {
  Model<U> out(variant_, num_classes_, input_length_);
  out.dropout_ = dropout_;
  out.rng_ = rng_;
  auto src = parameters();
  auto dst = out.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) {
    auto s = src[i].tensor.data();
    auto d = dst[i].tensor.data();
    for (std::size_t j = 0; j < s.size(); ++j) d[j] = static_cast<U>(s[j]);
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template Model<double> Model<float>::cast<double>() const;
template Model<float> Model<double>::cast<float>() const;
template Model<float> Model<float>::cast<float>() const;
template Model<double> Model<double>::cast<double>() const;

}  // namespace papernet
