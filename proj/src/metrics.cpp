// SPDX-License-Identifier: Apache-2.0
#include "papernet/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>

namespace papernet::metrics {

std::size_t ConfusionMatrix::total() const {
  std::size_t n = 0;
  for (const auto& row : counts) n = std::accumulate(row.begin(), row.end(), n);
  return n;
}

std::size_t ConfusionMatrix::trace() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) n += counts[k][k];
  return n;
}

ConfusionMatrix confusion(const std::vector<int>& y_true, const std::vector<int>& y_pred, int K) {
  if (y_true.size() != y_pred.size()) {
    throw std::invalid_argument("confusion: " + std::to_string(y_true.size()) + " labels vs " +
                                std::to_string(y_pred.size()) + " predictions");
  }
  ConfusionMatrix cm;
  cm.counts.assign(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    if (y_true[i] < 0 || y_true[i] >= K || y_pred[i] < 0 || y_pred[i] >= K) {
      throw std::out_of_range("confusion: label out of range at index " + std::to_string(i));
    }
    ++cm.counts[y_true[i]][y_pred[i]];
  }
  return cm;
}

double f1_from_precision_recall(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

double f1_from_counts(std::size_t tp, std::size_t fp, std::size_t fn) {
  const std::size_t d = 2 * tp + fp + fn;
  return d ? 2.0 * static_cast<double>(tp) / static_cast<double>(d) : 0.0;
}

PrfReport prf_metrics(const ConfusionMatrix& cm) {
  const std::size_t K = cm.num_classes();
  const std::size_t total = cm.total();
  PrfReport r;
  r.accuracy = total ? static_cast<double>(cm.trace()) / static_cast<double>(total) : 0.0;
  for (std::size_t k = 0; k < K; ++k) {
    ClassStats s;
    std::size_t row = 0, col = 0;
    for (std::size_t j = 0; j < K; ++j) {
      row += cm.counts[k][j];
      col += cm.counts[j][k];
    }
    s.tp = cm.counts[k][k];
    s.fp = col - s.tp;
    s.fn = row - s.tp;
    s.tn = total - s.tp - s.fp - s.fn;
    s.precision = s.tp + s.fp ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fp) : 0.0;
    s.recall = s.tp + s.fn ? static_cast<double>(s.tp) / static_cast<double>(s.tp + s.fn) : 0.0;
    s.f1 = f1_from_precision_recall(s.precision, s.recall);
    r.per_class.push_back(s);
  }
  if (K) {
    for (const auto& s : r.per_class) {
      r.macro_precision += s.precision;
      r.macro_recall += s.recall;
      r.macro_f1 += s.f1;
    }
    r.macro_precision /= static_cast<double>(K);
    r.macro_recall /= static_cast<double>(K);
    r.macro_f1 /= static_cast<double>(K);
  }
  return r;
}

RocReport roc_auc(const std::vector<double>& scores, const std::vector<int>& y_true, int K) {
  const std::size_t n = y_true.size();
  if (scores.size() != n * static_cast<std::size_t>(K)) {
    throw std::invalid_argument("roc_auc: scores must be [n x K]");
  }
  RocReport report;
  std::size_t defined = 0;
  for (int k = 0; k < K; ++k) {
    RocCurve curve;
    curve.cls = k;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return scores[a * K + k] > scores[b * K + k];
    });
    std::size_t pos = 0;
    for (int y : y_true) pos += y == k;
    const std::size_t neg = n - pos;

    curve.points.push_back({std::numeric_limits<double>::infinity(), 0.0, 0.0});
    if (pos == 0 || neg == 0) {
      report.warnings.push_back("class " + std::to_string(k) + " has no " +
                                (pos == 0 ? "positives" : "negatives") +
                                "; AUC undefined and excluded from the macro average");
      report.curves.push_back(std::move(curve));
      continue;
    }
    std::size_t tp = 0, fp = 0;
    double area = 0.0;
    for (std::size_t i = 0; i < n;) {
      const double thr = scores[order[i] * K + k];
      std::size_t j = i;
      for (; j < n && scores[order[j] * K + k] == thr; ++j) {
        if (y_true[order[j]] == k) ++tp; else ++fp;
      }
      const double fpr = static_cast<double>(fp) / static_cast<double>(neg);
      const double tpr = static_cast<double>(tp) / static_cast<double>(pos);
      const RocPoint& prev = curve.points.back();
      area += (fpr - prev.fpr) * (tpr + prev.tpr) / 2.0;
      curve.points.push_back({thr, fpr, tpr});
      i = j;
    }
    curve.auc = area;
    curve.defined = true;
    report.macro_auc += area;
    ++defined;
    report.curves.push_back(std::move(curve));
  }
  if (defined) {
    report.macro_auc /= static_cast<double>(defined);
  } else {
    report.macro_auc = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

double rank_auc(const std::vector<double>& scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw std::invalid_argument("rank_auc: size mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mid-ranks for tied groups.
  double rank_sum = 0.0;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t)
      if (positive[order[t]]) {
        rank_sum += mid;
        ++pos;
      }
    i = j;
  }
  const std::size_t neg = n - pos;
  if (pos == 0 || neg == 0) return std::numeric_limits<double>::quiet_NaN();
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

McNemarResult mcnemar(const std::vector<bool>& correct_a, const std::vector<bool>& correct_b) {
  if (correct_a.size() != correct_b.size()) {
    throw std::invalid_argument("mcnemar: paired lists differ in length");
  }
  McNemarResult r;
  for (std::size_t i = 0; i < correct_a.size(); ++i) {
    if (correct_a[i] && !correct_b[i]) ++r.b;
    if (!correct_a[i] && correct_b[i]) ++r.c;
  }
  const std::size_t discordant = r.b + r.c;
  if (discordant == 0) return r;
  const double diff = std::abs(static_cast<double>(r.b) - static_cast<double>(r.c)) - 1.0;
  r.chi2 = diff * diff / static_cast<double>(discordant);
  r.significant = r.chi2 > kChi2Critical95;
  return r;
}

std::vector<int> random_baseline(std::size_t n, int K, std::uint64_t seed) {
  if (K < 1) throw std::invalid_argument("random_baseline: K must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> draw(0, K - 1);
  std::vector<int> out(n);
  for (int& v : out) v = draw(rng);
  return out;
}

std::vector<int> argmax_rows(const std::vector<double>& scores, int K) {
  std::vector<int> out(scores.size() / K);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const auto row = scores.begin() + static_cast<std::ptrdiff_t>(i * K);
    out[i] = static_cast<int>(std::max_element(row, row + K) - row);
  }
  return out;
}

EvalReport evaluate(const std::vector<double>& scores, const std::vector<int>& y_true, int K,
                    std::uint64_t baseline_seed) {
  EvalReport r;
  r.samples = y_true.size();
  const auto pred = argmax_rows(scores, K);
  r.cm = confusion(y_true, pred, K);
  r.prf = prf_metrics(r.cm);
  r.roc = roc_auc(scores, y_true, K);
  const auto baseline = random_baseline(y_true.size(), K, baseline_seed);
  std::vector<bool> model_ok(y_true.size()), base_ok(y_true.size());
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    model_ok[i] = pred[i] == y_true[i];
    base_ok[i] = baseline[i] == y_true[i];
  }
  r.vs_random = mcnemar(model_ok, base_ok);
  return r;
}

void write_roc_csv(const RocReport& roc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out.precision(17);
  out << "class,threshold,fpr,tpr\n";
  for (const auto& c : roc.curves)
    for (const auto& p : c.points) {
      out << c.cls << ',';
      if (std::isinf(p.threshold)) out << "inf"; else out << p.threshold;
      out << ',' << p.fpr << ',' << p.tpr << '\n';
    }
}

}  // namespace papernet::metrics
