// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace papernet::metrics {

/// counts[i][j] = #{true == i and predicted == j}
struct ConfusionMatrix {
  std::vector<std::vector<std::size_t>> counts;

  std::size_t num_classes() const { return counts.size(); }
  std::size_t total() const;
  std::size_t trace() const;
};

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred, int K);

struct ClassStats {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0;
};

struct PrfReport {
  double accuracy = 0.0;
  std::vector<ClassStats> per_class;
  double macro_precision = 0.0, macro_recall = 0.0, macro_f1 = 0.0;
};

/// One-vs-rest precision/recall/F1 with zero-denominator metrics set to 0.
PrfReport prf_metrics(const ConfusionMatrix& cm);

/// 2PR / (P + R), or 0 when P + R == 0.
double f1_from_precision_recall(double precision, double recall);
/// 2TP / (2TP + FP + FN), or 0 when the denominator is 0.
double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn);

struct RocPoint {
  double threshold, fpr, tpr;
};

struct RocCurve {
  int cls = 0;
  std::vector<RocPoint> points;  // from (0,0) to (1,1)
  double auc = 0.0;
  bool defined = false;  // false when the class lacks positives or negatives
};

struct RocReport {
  std::vector<RocCurve> curves;
  double macro_auc = 0.0;
  std::vector<std::string> warnings;
};

/// scores is row-major [n x K]. For each class, thresholds sweep every
/// distinct score from high to low; AUC is the trapezoidal area.
RocReport roc_auc(const std::vector<double>& scores, const std::vector<int>& y_true, int K);

/// Binary AUC by the rank statistic with ties counted 1/2.
double rank_auc(const std::vector<double>& scores, const std::vector<bool>& positive);

struct McNemarResult {
  std::size_t b = 0;  // a correct, b wrong
  std::size_t c = 0;  // a wrong, b correct
  double chi2 = 0.0;
  bool significant = false;
};

inline constexpr double kChi2Critical95 = 3.841459;

/// Continuity-corrected chi-square on discordant pairs, alpha = 0.05.
McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b);

/// Uniform independent draws over 0..K-1.
std::vector<int> random_baseline(std::size_t n, int K, std::uint64_t seed);

std::vector<int> argmax_rows(const std::vector<double>& scores, int K);

struct EvalReport {
  std::string variant;
  std::size_t samples = 0;
  ConfusionMatrix cm;
  PrfReport prf;
  RocReport roc;
  McNemarResult vs_random;
};

EvalReport evaluate(const std::vector<double>& scores, const std::vector<int>& y_true, int K,
                    std::uint64_t baseline_seed);

void write_roc_csv(const RocReport& roc, const std::filesystem::path& path);

}  // namespace papernet::metrics
