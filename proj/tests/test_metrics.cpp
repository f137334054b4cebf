// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "papernet/metrics.hpp"
#include "test_util.hpp"

using namespace papernet::metrics;

namespace {

// Pairwise definition: P(score_pos > score_neg) + 0.5 P(equal).
double brute_auc(const std::vector<double>& s, const std::vector<bool>& pos) {
  double num = 0, den = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (pos[i] && !pos[j]) {
        den += 1;
        num += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
      }
  return num / den;
}

}  // namespace

TEST_CASE("confusion and per-class F1 example") {
  const std::vector<int> y{0, 1, 1, 1, 2, 2};
  const std::vector<int> p{0, 0, 1, 1, 0, 2};
  const auto cm = confusion(y, p, 3);
  CHECK(cm.counts == std::vector<std::vector<std::size_t>>{{1, 0, 0}, {1, 2, 0}, {1, 0, 1}});
  CHECK(cm.total() == 6);
  CHECK(cm.trace() == 4);
  const auto r = prf_metrics(cm);
  CHECK(r.accuracy == doctest::Approx(4.0 / 6.0));
  CHECK(r.per_class[0].f1 == doctest::Approx(0.5));
  CHECK(r.per_class[1].f1 == doctest::Approx(0.8));
  CHECK(r.per_class[2].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(r.macro_f1 == doctest::Approx((0.5 + 0.8 + 2.0 / 3.0) / 3.0).epsilon(1e-12));
  CHECK(r.macro_f1 == doctest::Approx(0.65556).epsilon(1e-5));
  CHECK(r.per_class[0].tn == 3);
  CHECK_THROWS_AS(confusion({0}, {0, 1}, 2), std::invalid_argument);
  CHECK_THROWS_AS(confusion({0}, {3}, 2), std::out_of_range);
}

TEST_CASE("absent class gets zero precision, recall and F1") {
  const auto r = prf_metrics(confusion({0, 0, 1}, {0, 0, 0}, 3));
  CHECK(r.per_class[1].f1 == 0.0);
  CHECK(r.per_class[2].precision == 0.0);
  CHECK(r.per_class[2].recall == 0.0);
  CHECK(f1_from_counts(0, 0, 0) == 0.0);
  CHECK(f1_from_precision_recall(0.0, 0.0) == 0.0);
}

TEST_CASE("AUC examples") {
  // Binary as two-class scores: positives {0.8, 0.4}, negatives {0.6, 0.2}.
  const std::vector<double> s{0.2, 0.8, 0.8, 0.2, 0.4, 0.6, 0.6, 0.4};
  const std::vector<int> y{1, 0, 0, 1};
  const auto r = roc_auc(s, y, 2);
  CHECK(r.curves[1].auc == doctest::Approx(0.75));
  CHECK(r.curves[0].auc == doctest::Approx(0.75));
  CHECK(rank_auc({0.8, 0.6, 0.4, 0.2}, {true, false, true, false}) == doctest::Approx(0.75));
  CHECK(rank_auc({0.1, 0.4, 0.35, 0.8}, {false, false, true, true}) == doctest::Approx(0.75));
  CHECK(rank_auc({0.5, 0.5, 0.5}, {true, false, true}) == doctest::Approx(0.5));
  const auto flat = roc_auc(std::vector<double>(8, 0.5), y, 2);
  CHECK(flat.macro_auc == doctest::Approx(0.5));
  CHECK(std::isnan(rank_auc({0.1, 0.2}, {true, true})));
}

TEST_CASE("undefined class AUC is excluded with a warning") {
  const std::vector<double> s{0.9, 0.1, 0.0, 0.2, 0.8, 0.0};
  const auto r = roc_auc(s, {0, 1}, 3);
  CHECK_FALSE(r.curves[2].defined);
  CHECK(r.warnings.size() == 1);
  CHECK(r.macro_auc == doctest::Approx(1.0));
}

TEST_CASE("random instances agree with independent oracles") {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 1000; ++trial) {
    const int K = 2 + static_cast<int>(rng() % 4);
    const std::size_t n = 5 + rng() % 60;
    std::vector<int> y(n), p(n);
    std::vector<double> scores(n * K);
    // Coarse grid so ties occur often.
    for (auto& v : scores) v = static_cast<double>(rng() % 7) / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng() % K);
      p[i] = static_cast<int>(rng() % K);
    }
    const auto r = prf_metrics(confusion(y, p, K));
    double macro = 0;
    std::size_t hits = 0;
    for (int k = 0; k < K; ++k) {
      std::size_t tp = 0, fp = 0, fn = 0;
      for (std::size_t i = 0; i < n; ++i) {
        tp += y[i] == k && p[i] == k;
        fp += y[i] != k && p[i] == k;
        fn += y[i] == k && p[i] != k;
      }
      const double f = f1_from_counts(tp, fp, fn);
      CHECK(r.per_class[k].f1 == doctest::Approx(f).epsilon(1e-12));
      macro += f;
    }
    for (std::size_t i = 0; i < n; ++i) hits += y[i] == p[i];
    CHECK(r.macro_f1 == doctest::Approx(macro / K).epsilon(1e-12));
    CHECK(r.accuracy == doctest::Approx(static_cast<double>(hits) / static_cast<double>(n)));

    const auto roc = roc_auc(scores, y, K);
    for (int k = 0; k < K; ++k) {
      std::vector<double> col(n);
      std::vector<bool> pos(n);
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = scores[i * K + k];
        pos[i] = y[i] == k;
      }
      const auto np = std::count(pos.begin(), pos.end(), true);
      if (np == 0 || np == static_cast<long>(n)) {
        CHECK_FALSE(roc.curves[k].defined);
        continue;
      }
      CHECK(roc.curves[k].auc == doctest::Approx(brute_auc(col, pos)).epsilon(1e-9));
      CHECK(std::abs(roc.curves[k].auc - rank_auc(col, pos)) < 1e-9);
      const auto& pts = roc.curves[k].points;
      CHECK(pts.front().fpr == 0.0);
      CHECK(pts.front().tpr == 0.0);
      CHECK(pts.back().fpr == doctest::Approx(1.0));
      CHECK(pts.back().tpr == doctest::Approx(1.0));
      for (std::size_t j = 1; j < pts.size(); ++j) {
        CHECK(pts[j].fpr >= pts[j - 1].fpr);
        CHECK(pts[j].tpr >= pts[j - 1].tpr);
        CHECK(pts[j].threshold < pts[j - 1].threshold);
      }
    }
  }
}

TEST_CASE("metrics are invariant to sample order") {
  std::mt19937_64 rng(3);
  const std::size_t n = 200;
  const int K = 4;
  std::vector<int> y(n);
  std::vector<double> s(n * K);
  for (auto& v : y) v = static_cast<int>(rng() % K);
  for (auto& v : s) v = std::uniform_real_distribution<double>()(rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<int> y2(n);
  std::vector<double> s2(n * K);
  for (std::size_t i = 0; i < n; ++i) {
    y2[i] = y[perm[i]];
    std::copy_n(s.begin() + perm[i] * K, K, s2.begin() + i * K);
  }
  const auto a = evaluate(s, y, K, 1), b = evaluate(s2, y2, K, 1);
  CHECK(a.prf.macro_f1 == doctest::Approx(b.prf.macro_f1).epsilon(1e-15));
  CHECK(a.roc.macro_auc == doctest::Approx(b.roc.macro_auc).epsilon(1e-12));
  CHECK(a.cm.counts == b.cm.counts);
}

TEST_CASE("McNemar") {
  SUBCASE("b = 30, c = 10 gives 19^2/40") {
    std::vector<bool> a, b;
    for (int i = 0; i < 30; ++i) a.push_back(true), b.push_back(false);
    for (int i = 0; i < 10; ++i) a.push_back(false), b.push_back(true);
    for (int i = 0; i < 50; ++i) a.push_back(true), b.push_back(true);
    const auto r = mcnemar(a, b);
    CHECK(r.b == 30);
    CHECK(r.c == 10);
    CHECK(r.chi2 == doctest::Approx(9.025));
    CHECK(r.significant);
  }
  SUBCASE("b = 13, c = 4 gives 4.7") {
    std::vector<bool> a(17, true), b(17, false);
    for (int i = 13; i < 17; ++i) a[i] = false, b[i] = true;
    const auto r = mcnemar(a, b);
    CHECK(r.chi2 == doctest::Approx(64.0 / 17.0));
    CHECK_FALSE(r.significant);
  }
  SUBCASE("b = 15, c = 5 gives 4.05") {
    std::vector<bool> a(20, true), b(20, false);
    for (int i = 15; i < 20; ++i) a[i] = false, b[i] = true;
    const auto r = mcnemar(a, b);
    CHECK(r.chi2 == doctest::Approx(4.05));
    CHECK(r.significant);
  }
  SUBCASE("b = c and no discordance") {
    std::vector<bool> a{true, false, true}, b{false, true, true};
    CHECK(mcnemar(a, b).chi2 == doctest::Approx(0.5));
    CHECK_FALSE(mcnemar(a, b).significant);
    const auto none = mcnemar(a, a);
    CHECK(none.b + none.c == 0);
    CHECK(none.chi2 == 0.0);
    CHECK_FALSE(none.significant);
  }
  CHECK_THROWS_AS(mcnemar({true}, {true, false}), std::invalid_argument);
}

TEST_CASE("random baseline is uniform and seeded") {
  const auto a = random_baseline(40000, 4, 9);
  CHECK(a == random_baseline(40000, 4, 9));
  CHECK(a != random_baseline(40000, 4, 10));
  std::vector<std::size_t> counts(4, 0);
  for (int v : a) ++counts.at(v);
  // Each count within 4 standard deviations of n/4.
  const double sd = std::sqrt(40000 * 0.25 * 0.75);
  for (auto c : counts) CHECK(std::abs(static_cast<double>(c) - 10000.0) < 4 * sd);
  CHECK_THROWS(random_baseline(3, 0, 1));
}

TEST_CASE("ROC CSV format") {
  testutil::TempDir dir("roc");
  const auto r = roc_auc({0.9, 0.1, 0.2, 0.8}, {0, 1}, 2);
  write_roc_csv(r, dir / "roc.csv");
  std::ifstream in(dir / "roc.csv");
  std::string line;
  std::getline(in, line);
  CHECK(line == "class,threshold,fpr,tpr");
  std::getline(in, line);
  CHECK(line == "0,inf,0,0");
}
