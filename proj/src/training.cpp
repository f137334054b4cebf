// SPDX-License-Identifier: Apache-2.0
#include "papernet/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "papernet/data.hpp"
#include "papernet/metrics.hpp"
#include "papernet/op_record.hpp"

namespace papernet {

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw std::invalid_argument("train config: " + what); };
  if (!(lr0 >= 0.0)) fail("lr0 must be >= 0");
  if (batch_size == 0) fail("batch_size must be positive");
  if (max_epochs == 0) fail("max_epochs must be positive");
  if (plateau_patience == 0) fail("plateau_patience must be positive");
  if (!(plateau_factor > 0.0 && plateau_factor < 1.0)) fail("plateau_factor must be in (0,1)");
  if (!(min_lr > 0.0)) fail("min_lr must be positive");
  if (early_stop_patience == 0) fail("early_stop_patience must be positive");
  if (!(l2 >= 0.0)) fail("l2 must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0,1)");
  if (!(min_delta >= 0.0)) fail("min_delta must be >= 0");
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.precision(10);
  out << "epoch,train_loss,train_acc,val_acc,val_macro_f1,lr,seconds\n";
  for (const auto& e : epochs) {
    out << e.epoch << ',' << e.train_loss << ',' << e.train_acc << ',' << e.val_acc << ','
        << e.val_macro_f1 << ',' << e.lr << ',' << e.seconds << '\n';
  }
}

template <class T>
Tensor<T> weighted_cross_entropy(const Tensor<T>& probs, std::span<const int> labels,
                                 std::span<const double> class_weights, const Model<T>& model,
                                 double l2) {
  Tensor<T> loss = ops::weighted_nll(probs, labels, class_weights);
  if (l2 > 0.0) {
    for (const auto& w : model.regularized_weights())
      loss = ops::add(loss, ops::scale(ops::sum_squares(w), static_cast<T>(l2)));
  }
  return loss;
}

template <class T>
Tensor<T> weighted_cross_entropy(const Tensor<T>& probs, const Tensor<T>& onehot,
                                 std::span<const double> class_weights, const Model<T>& model,
                                 double l2) {
  if (onehot.shape() != probs.shape() || probs.rank() != 2) {
    throw ShapeError("weighted_cross_entropy: probs " + shape_str(probs.shape()) + " vs labels " +
                     shape_str(onehot.shape()));
  }
  const std::size_t B = probs.dim(0), K = probs.dim(1);
  std::vector<int> labels(B, -1);
  for (std::size_t i = 0; i < B; ++i) {
    std::size_t ones = 0;
    for (std::size_t k = 0; k < K; ++k) {
      const T v = onehot[i * K + k];
      if (v == T{1}) {
        labels[i] = static_cast<int>(k);
        ++ones;
      } else if (v != T{0}) {
        ones = 2;
      }
    }
    if (ones != 1) throw std::invalid_argument("weighted_cross_entropy: row " + std::to_string(i) + " is not one-hot");
  }
  return weighted_cross_entropy(probs, std::span<const int>(labels), class_weights, model, l2);
}

template <class T>
Adam<T>::Adam(std::vector<Tensor<T>> params) : params_(std::move(params)) {
  for (const auto& p : params_) {
    m_.emplace_back(p.size(), 0.0);
    v_.emplace_back(p.size(), 0.0);
  }
}

template <class T>
void Adam<T>::step(double lr) {
  for (const auto& p : params_) {
    if (!p.has_grad()) continue;
    for (T g : p.grad())
      if (!std::isfinite(g)) throw TrainingError("adam: non-finite gradient");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor<T>& p = params_[i];
    if (!p.has_grad()) continue;
    auto g = p.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (std::size_t j = 0; j < p.size(); ++j) {
      const double gj = static_cast<double>(g[j]);
      m[j] = kBeta1 * m[j] + (1.0 - kBeta1) * gj;
      v[j] = kBeta2 * v[j] + (1.0 - kBeta2) * gj * gj;
      const double mh = m[j] / c1;
      const double vh = v[j] / c2;
      p[j] = static_cast<T>(static_cast<double>(p[j]) - lr * mh / (std::sqrt(vh) + kEps));
    }
  }
}

PlateauScheduler::PlateauScheduler(double lr, std::size_t patience, double factor, double min_lr,
                                   double min_delta)
    : lr_(lr), patience_(patience), factor_(factor), min_lr_(min_lr), min_delta_(min_delta) {}

double PlateauScheduler::update(double metric) {
  if (!best_ || metric > *best_ + min_delta_) {
    best_ = metric;
    wait_ = 0;
    return lr_;
  }
  if (++wait_ >= patience_) {
    lr_ = std::max(min_lr_, lr_ * factor_);
    wait_ = 0;
  }
  return lr_;
}

EarlyStopper::EarlyStopper(std::size_t patience, double min_delta)
    : patience_(patience), min_delta_(min_delta) {}

bool EarlyStopper::update(double metric) {
  ++epoch_;
  if (best_epoch_ == 0 || metric > best_value_) {
    best_value_ = metric;
    best_epoch_ = epoch_;
  }
  if (!reference_ || metric > *reference_ + min_delta_) {
    reference_ = metric;
    wait_ = 0;
    return false;
  }
  return ++wait_ >= patience_;
}

std::vector<double> predict_proba(Model<float>& model, const Tensor<float>& inputs,
                                  std::size_t chunk) {
  const std::size_t n = inputs.dim(0);
  const std::size_t row = n ? inputs.size() / n : 0;
  std::vector<double> out;
  out.reserve(n * model.num_classes());
  for (std::size_t start = 0; start < n; start += chunk) {
    const std::size_t m = std::min(chunk, n - start);
    Shape s = inputs.shape();
    s[0] = m;
    Tensor<float> part(s);
    std::copy_n(inputs.data().begin() + start * row, m * row, part.data().begin());
    const Tensor<float> probs = model.forward(part, Mode::infer);
    out.insert(out.end(), probs.data().begin(), probs.data().end());
  }
  return out;
}

namespace {

Tensor<float> gather_rows(const Tensor<float>& inputs, std::span<const std::size_t> rows) {
  const std::size_t row = inputs.size() / inputs.dim(0);
  Shape s = inputs.shape();
  s[0] = rows.size();
  Tensor<float> out(s);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(inputs.data().begin() + rows[i] * row, row, out.data().begin() + i * row);
  return out;
}

std::mt19937_64 epoch_rng(std::uint64_t seed, std::size_t epoch, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), stream};
  return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(Model<float> model, const LabeledSet& train_set, const LabeledSet& val_set,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  if (train_set.size() < 2) throw std::invalid_argument("train: need at least 2 training samples");
  if (val_set.size() == 0) throw std::invalid_argument("train: empty validation set");
  const int K = static_cast<int>(model.num_classes());
  model.set_dropout_rate(config.dropout);

  const std::vector<double> weights = config.class_weighting
                                          ? class_weights(train_set.labels, K)
                                          : std::vector<double>(K, 1.0);

  std::vector<Tensor<float>> trainable;
  for (const auto& p : model.trainable_parameters()) trainable.push_back(p.tensor);
  Adam<float> adam(trainable);
  PlateauScheduler scheduler(config.lr0, config.plateau_patience, config.plateau_factor,
                             config.min_lr, config.min_delta);
  EarlyStopper stopper(config.early_stop_patience, config.min_delta);

  TrainResult result{model.clone(), model, {}};
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto started = std::chrono::steady_clock::now();
    const double lr = scheduler.lr();
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto shuffle_rng = epoch_rng(config.seed, epoch, 0);
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    auto dropout_rng = epoch_rng(config.seed, epoch, 1);

    // Batch boundaries; a trailing batch of one joins its predecessor
    // because batch statistics need at least two samples.
    std::vector<std::size_t> bounds;
    for (std::size_t s = 0; s < n; s += config.batch_size) bounds.push_back(s);
    if (bounds.size() > 1 && n - bounds.back() == 1) bounds.pop_back();
    bounds.push_back(n);

    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
      const std::span<const std::size_t> rows(order.data() + bounds[b], bounds[b + 1] - bounds[b]);
      const Tensor<float> x = gather_rows(train_set.inputs, rows);
      std::vector<int> y;
      for (std::size_t r : rows) y.push_back(train_set.labels[r]);

      Tape<float> tape;
      Tensor<float> probs, loss;
      try {
        auto rec = tape.record();
        probs = model.forward(x, Mode::train, &dropout_rng);
        loss = weighted_cross_entropy(probs, std::span<const int>(y), weights, model, config.l2);
      } catch (const NumericError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b + 1) +
                            ": " + e.what());
      }
      if (!std::isfinite(loss.item())) {
        throw TrainingError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b + 1) +
                            ": non-finite loss");
      }
      tape.backward(loss);
      try {
        adam.step(lr);
      } catch (const TrainingError& e) {
        throw TrainingError("epoch " + std::to_string(epoch) + " batch " + std::to_string(b + 1) +
                            ": " + e.what());
      }
      loss_sum += static_cast<double>(loss.item()) * static_cast<double>(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const auto row = probs.data().begin() + static_cast<std::ptrdiff_t>(i * K);
        correct += static_cast<int>(std::max_element(row, row + K) - row) == y[i];
      }
    }

    const auto val_scores = predict_proba(model, val_set.inputs);
    const auto cm = metrics::confusion(val_set.labels, metrics::argmax_rows(val_scores, K), K);
    const auto prf = metrics::prf_metrics(cm);

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(n);
    rec.train_acc = static_cast<double>(correct) / static_cast<double>(n);
    rec.val_acc = prf.accuracy;
    rec.val_macro_f1 = prf.macro_f1;
    rec.lr = lr;
    if (config.record_timing) {
      rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
    }
    result.history.epochs.push_back(rec);

    const std::size_t previous_best = stopper.best_epoch();
    const bool stop = stopper.update(prf.macro_f1);
    if (stopper.best_epoch() != previous_best) result.best = model.clone();
    scheduler.update(prf.macro_f1);
    if (on_epoch) on_epoch(rec);
    if (stop && config.early_stopping) {
      result.history.stopped_early = true;
      break;
    }
  }
  result.history.best_epoch = stopper.best_epoch();
  result.final = model;
  return result;
}

template Tensor<float> weighted_cross_entropy(const Tensor<float>&, std::span<const int>,
                                              std::span<const double>, const Model<float>&, double);
template Tensor<double> weighted_cross_entropy(const Tensor<double>&, std::span<const int>,
                                               std::span<const double>, const Model<double>&, double);
template Tensor<float> weighted_cross_entropy(const Tensor<float>&, const Tensor<float>&,
                                              std::span<const double>, const Model<float>&, double);
template Tensor<double> weighted_cross_entropy(const Tensor<double>&, const Tensor<double>&,
                                               std::span<const double>, const Model<double>&, double);
template class Adam<float>;
template class Adam<double>;

}  // namespace papernet
