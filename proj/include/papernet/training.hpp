// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "papernet/model.hpp"

namespace papernet {

struct TrainConfig {
  double lr0 = 1e-3;
  std::size_t batch_size = 64;
  std::size_t max_epochs = 100;
  std::size_t plateau_patience = 3;
  double plateau_factor = 0.5;
  double min_lr = 1e-6;
  std::size_t early_stop_patience = 6;
  double l2 = 1e-4;
  double dropout = 0.3;
  std::uint64_t seed = 0;
  bool class_weighting = true;
  bool early_stopping = true;
  /// Minimum change that counts as an improvement (scheduler and stopper).
  double min_delta = 1e-4;
  /// Fill the history's seconds column with measured wall time. Off by
  /// default so identical runs write identical history files.
  bool record_timing = false;

  void validate() const;
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  double val_macro_f1 = 0.0;
  double lr = 0.0;
  double seconds = 0.0;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  bool stopped_early = false;

  void write_csv(const std::filesystem::path& path) const;
};

/// Raised on NaN/Inf loss or gradients, with epoch/batch context.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mean weighted NLL plus l2 * sum of squared regularized weights.
template <class T>
Tensor<T> weighted_cross_entropy(const Tensor<T>& probs, std::span<const int> labels,
                                 std::span<const double> class_weights, const Model<T>& model,
                                 double l2);

/// One-hot form; `onehot` must have exactly one 1 per row.
template <class T>
Tensor<T> weighted_cross_entropy(const Tensor<T>& probs, const Tensor<T>& onehot,
                                 std::span<const double> class_weights, const Model<T>& model,
                                 double l2);

template <class T>
class Adam {
 public:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-7;

  explicit Adam(std::vector<Tensor<T>> params);

  /// Bias-corrected update from each parameter's .grad.
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<Tensor<T>> params_;
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
};

/// Halves (by `factor`) the learning rate after `patience` epochs without
/// an improvement larger than `min_delta`; never below `min_lr`.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, std::size_t patience, double factor, double min_lr,
                   double min_delta = 1e-4);
  double update(double metric);
  double lr() const { return lr_; }

 private:
  double lr_;
  std::size_t patience_;
  double factor_, min_lr_, min_delta_;
  std::optional<double> best_;
  std::size_t wait_ = 0;
};

class EarlyStopper {
 public:
  explicit EarlyStopper(std::size_t patience, double min_delta = 1e-4);
  /// Returns true when training should stop after this epoch.
  bool update(double metric);
  /// 1-based epoch of the highest metric seen (earliest on ties).
  std::size_t best_epoch() const { return best_epoch_; }
  double best_value() const { return best_value_; }

 private:
  std::size_t patience_;
  double min_delta_;
  std::optional<double> reference_;
  std::size_t wait_ = 0, epoch_ = 0, best_epoch_ = 0;
  double best_value_ = 0.0;
};

struct LabeledSet {
  Tensor<float> inputs;  // [n x T x 1]
  std::vector<int> labels;
  std::size_t size() const { return labels.size(); }
};

struct TrainResult {
  Model<float> best;
  Model<float> final;
  TrainHistory history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Infer-mode class probabilities, row-major [n x K].
std::vector<double> predict_proba(Model<float>& model, const Tensor<float>& inputs,
                                  std::size_t chunk = 512);

TrainResult train(Model<float> model, const LabeledSet& train_set, const LabeledSet& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

}  // namespace papernet
