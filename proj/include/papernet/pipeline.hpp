// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "papernet/data.hpp"
#include "papernet/metrics.hpp"
#include "papernet/training.hpp"

namespace papernet {

/// Invalid or unresolvable run configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  TrainConfig train;
  std::filesystem::path dataset;
  std::filesystem::path outdir = "runs/default";
  double sample_rate_hz = 256.0;
  double band_low_hz = 0.5;
  double band_high_hz = 45.0;
  int filter_order = 4;
  bool bandpass = true;
  Variant variant = Variant::full;
  int num_classes = 4;
  /// Master seed: split, initialization, shuffling and dropout all derive from it.
  std::uint64_t seed = 0;

  /// Keys mirror the field names (TrainConfig fields at top level). Unknown
  /// keys are rejected.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  /// Checks ranges and that the dataset exists; throws ConfigError.
  void validate(bool need_dataset = true) const;
};

/// The held-out split. It can be read once; a second read throws.
class HeldOutSet {
 public:
  HeldOutSet() = default;
  explicit HeldOutSet(LabeledSet data) : data_(std::move(data)) {}
  const LabeledSet& read();
  std::size_t reads() const { return reads_; }
  std::size_t size() const { return data_.size(); }

 private:
  LabeledSet data_;
  std::size_t reads_ = 0;
};

struct PreparedData {
  SplitIndices split;
  dsp::Standardizer standardizer;
  LabeledSet train, val;
  HeldOutSet test;
  std::vector<double> standardized;  // row-major [N x 16]
  std::vector<int> labels;
};

/// ingest -> band-pass -> stratified split -> standardize (fit on train).
PreparedData prepare_data(const RunConfig& config, std::ostream* log = nullptr);

nlohmann::json report_to_json(const metrics::EvalReport& report);

struct RunSummary {
  metrics::EvalReport test_report;
  TrainHistory history;
  std::uint64_t split_fingerprint = 0;
  std::size_t parameters = 0;
};

/// Full training run. Writes into config.outdir: weights_best,
/// weights_final, history.csv, report.json, roc.csv, attention.csv (when
/// the variant has attention) and config_resolved.json.
RunSummary run_training(const RunConfig& config, std::ostream* log = nullptr);

struct AblationRow {
  Variant variant;
  double accuracy = 0.0, macro_f1 = 0.0, macro_roc_auc = 0.0;
};

/// Trains every variant on the same split and seed; each run writes into
/// outdir/<variant>/, and the table goes to outdir/ablation.{csv,json}.
std::vector<AblationRow> run_ablation(const RunConfig& config, std::ostream* log = nullptr);

enum class SplitChoice { train, val, test, all };
SplitChoice parse_split(const std::string& name);

/// Evaluates saved weights on one split of the configured dataset and
/// writes outdir/eval_<split>.json plus roc_<split>.csv.
metrics::EvalReport run_evaluation(const RunConfig& config, const std::filesystem::path& weights,
                                   SplitChoice split, std::ostream* log = nullptr);

/// Writes the band-passed dataset to outdir/preprocessed.csv.
std::filesystem::path run_preprocess(const RunConfig& config, std::ostream* log = nullptr);

/// Attention vectors for one split, written to outdir/attention.csv.
std::filesystem::path run_export_attention(const RunConfig& config,
                                           const std::filesystem::path& weights, SplitChoice split,
                                           std::ostream* log = nullptr);

struct BenchResult {
  std::size_t samples = 0;
  double mean_ms = 0.0, p50_ms = 0.0, p95_ms = 0.0;
  std::size_t parameters = 0;
};

/// Single-sample infer-mode latency over `n_samples` timed iterations
/// (after a short warm-up).
BenchResult run_bench(Model<float>& model, std::size_t n_samples, std::uint64_t seed = 0);

}  // namespace papernet
