// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "papernet/layers.hpp"

namespace papernet {

enum class Variant { full, no_attention, no_lstm, no_residual };

std::string_view to_string(Variant v);
/// Accepts "full", "no_attention", "no_lstm", "no_residual" (dashes allowed).
Variant parse_variant(std::string_view name);
inline constexpr Variant kAllVariants[] = {Variant::full, Variant::no_attention,
                                           Variant::no_lstm, Variant::no_residual};

inline constexpr std::size_t kConv1Filters = 32;
inline constexpr std::size_t kConv2Filters = 64;
inline constexpr std::size_t kConv3Filters = 128;
inline constexpr std::size_t kSeBottleneck = 32;
inline constexpr std::size_t kLstmHidden = 64;  // per direction
inline constexpr std::size_t kDenseUnits = 128;
inline constexpr double kDropout = 0.3;

enum class ParamKind {
  weight,       // L2-regularized
  bias,
  norm,         // batch-norm gamma/beta
  running_stat  // not trainable
};

template <class T>
struct NamedParam {
  std::string name;
  ParamKind kind;
  Tensor<T> tensor;
  bool trainable() const { return kind != ParamKind::running_stat; }
};

/// Intermediate activations of one forward pass, for inspection in tests
/// and for attention export.
template <class T>
struct ForwardTrace {
  Tensor<T> conv1, bn1, conv2, bn2, pool, conv3, bn3;
  Tensor<T> encoded;    // F  (bn3 output)
  Tensor<T> attention;  // a  [B x 128], undefined without SE
  Tensor<T> attended;   // F'
  Tensor<T> recurrent;  // h_t [B x T~ x 128], undefined for no_lstm
  Tensor<T> pooled;     // [B x 128]
  Tensor<T> dense1, dropped, probs;
};

template <class T>
class Model {
 public:
  Model(Variant variant, std::size_t num_classes, std::size_t input_length,
        std::uint64_t seed = 0);

  /// batch [B x T x 1] (or [B x T]) -> class probabilities [B x K].
  /// `rng` drives dropout in train mode; a model-owned generator is used
  /// when none is given.
  Tensor<T> forward(const Tensor<T>& batch, Mode mode, std::mt19937_64* rng = nullptr,
                    ForwardTrace<T>* trace = nullptr);

  Variant variant() const { return variant_; }
  std::size_t num_classes() const { return num_classes_; }
  std::size_t input_length() const { return input_length_; }
  bool has_attention() const { return variant_ != Variant::no_attention; }
  bool has_lstm() const { return variant_ != Variant::no_lstm; }

  double dropout_rate() const { return dropout_; }
  void set_dropout_rate(double p);

  /// Every tensor in serialization order, running statistics included.
  std::vector<NamedParam<T>> parameters() const;
  std::vector<NamedParam<T>> trainable_parameters() const;
  /// Weight matrices/kernels that carry the L2 penalty.
  std::vector<Tensor<T>> regularized_weights() const;

  std::size_t count_parameters() const;     // trainable only
  std::size_t count_nontrainable() const;   // running statistics

  /// Deep copy (no shared storage with *this).
  Model clone() const;

  template <class U>
  Model<U> cast() const;

 private:
  template <class>
  friend class Model;

  Variant variant_;
  std::size_t num_classes_;
  std::size_t input_length_;
  double dropout_ = kDropout;
  std::mt19937_64 rng_;

  Tensor<T> conv1_k_, conv1_b_, conv2_k_, conv2_b_, conv3_k_, conv3_b_;
  BatchNormParams<T> bn1_, bn2_, bn3_;
  std::optional<SeParams<T>> se_;
  std::optional<BiLstmParams<T>> lstm_;
  Tensor<T> dense1_w_, dense1_b_, dense2_w_, dense2_b_;
};

template <class T>
Model<T> build_papernet(std::size_t num_classes, std::size_t input_length, Variant variant,
                        std::uint64_t seed = 0) {
  return Model<T>(variant, num_classes, input_length, seed);
}

}  // namespace papernet
