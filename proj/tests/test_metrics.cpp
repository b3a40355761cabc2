#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "agirisk/error.hpp"
#include "agirisk/metrics.hpp"
#include "agirisk/rng.hpp"

using namespace agirisk;

namespace {

// Independent oracle: trapezoidal integration of the ROC curve, sweeping
// thresholds over distinct score values (ties grouped).
double trapezoid_auc(const std::vector<double>& scores,
                     const std::vector<int>& labels) {
  std::vector<double> distinct = scores;
  std::sort(distinct.begin(), distinct.end(), std::greater<>());
  distinct.erase(std::unique(distinct.begin(), distinct.end()),
                 distinct.end());
  double n_pos = 0, n_neg = 0;
  for (int y : labels) (y == 1 ? n_pos : n_neg) += 1;

  double auc = 0.0, prev_fpr = 0.0, prev_tpr = 0.0;
  for (double threshold : distinct) {
    double tp = 0, fp = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= threshold) (labels[i] == 1 ? tp : fp) += 1;
    }
    const double tpr = tp / n_pos;
    const double fpr = fp / n_neg;
    auc += (fpr - prev_fpr) * (tpr + prev_tpr) / 2.0;
    prev_fpr = fpr;
    prev_tpr = tpr;
  }
  auc += (1.0 - prev_fpr) * (1.0 + prev_tpr) / 2.0;
  return auc;
}

}  // namespace

TEST_CASE("confusion matrix counting") {
  CHECK_THROWS_AS(confusion({}, {}), Error);
  CHECK_THROWS_AS(confusion({1, 0}, {1}), Error);

  const std::vector<int> labels = {1, 1, 1, 0, 0, 0, 0, 0, 0, 0};
  SUBCASE("perfect predictions") {
    const ConfusionMatrix cm = confusion(labels, labels);
    CHECK(cm.fp == 0);
    CHECK(cm.fn == 0);
    CHECK(cm.tp == 3);
    CHECK(cm.tn == 7);
  }
  SUBCASE("all predicted positive") {
    const ConfusionMatrix cm = confusion(std::vector<int>(10, 1), labels);
    CHECK(cm.tp == 3);
    CHECK(cm.fp == 7);
    CHECK(cm.fn == 0);
    CHECK(cm.tn == 0);
  }
  SUBCASE("inverted predictions swap tp<->fn and tn<->fp") {
    std::vector<int> inverted = labels;
    for (int& y : inverted) y = 1 - y;
    const ConfusionMatrix cm = confusion(inverted, labels);
    CHECK(cm.tp == 0);
    CHECK(cm.fn == 3);
    CHECK(cm.fp == 7);
    CHECK(cm.tn == 0);
  }
}

TEST_CASE("basic metrics match the published counts") {
  // 47 detected of 61 episodes and 148 false positives, as reported.
  ConfusionMatrix cm;
  cm.tp = 47;
  cm.fn = 14;
  cm.fp = 148;
  cm.tn = 500;
  const BasicMetrics m = basic_metrics(cm);
  CHECK(m.recall == doctest::Approx(47.0 / 61.0).epsilon(1e-12));
  CHECK(m.recall == doctest::Approx(0.7704918032786885).epsilon(1e-12));
  CHECK(m.precision == doctest::Approx(47.0 / 195.0).epsilon(1e-12));
  CHECK(m.precision == doctest::Approx(0.241).epsilon(1e-3));
}

TEST_CASE("undefined ratios return flagged zeros") {
  ConfusionMatrix cm;
  cm.tn = 5;
  cm.fn = 2;
  const BasicMetrics m = basic_metrics(cm);
  CHECK(m.precision == 0.0);
  CHECK_FALSE(m.precision_defined);
  CHECK(m.recall == 0.0);
  CHECK(m.specificity_defined);

  CHECK_THROWS_AS(basic_metrics(ConfusionMatrix{}), Error);
}

TEST_CASE("basic metrics against brute-force recomputation") {
  Rng rng(11);
  for (int iter = 0; iter < 50; ++iter) {
    std::vector<int> preds, labels;
    for (int i = 0; i < 80; ++i) {
      preds.push_back(rng.bernoulli(0.4) ? 1 : 0);
      labels.push_back(rng.bernoulli(0.3) ? 1 : 0);
    }
    const ConfusionMatrix cm = confusion(preds, labels);
    long long tp = 0, fp = 0, fn = 0, tn = 0;
    for (size_t i = 0; i < preds.size(); ++i) {
      tp += preds[i] == 1 && labels[i] == 1;
      fp += preds[i] == 1 && labels[i] == 0;
      fn += preds[i] == 0 && labels[i] == 1;
      tn += preds[i] == 0 && labels[i] == 0;
    }
    REQUIRE(cm.tp == tp);
    REQUIRE(cm.fp == fp);
    REQUIRE(cm.fn == fn);
    REQUIRE(cm.tn == tn);
    const BasicMetrics m = basic_metrics(cm);
    const double total = static_cast<double>(tp + fp + fn + tn);
    CHECK(m.accuracy == doctest::Approx((tp + tn) / total).epsilon(1e-15));
    if (tp + fp > 0)
      CHECK(m.precision ==
            doctest::Approx(double(tp) / double(tp + fp)).epsilon(1e-15));
    if (tp + fn > 0)
      CHECK(m.recall ==
            doctest::Approx(double(tp) / double(tp + fn)).epsilon(1e-15));
    if (m.precision + m.recall > 0 && m.precision_defined && m.recall_defined)
      CHECK(m.f1 == doctest::Approx(2 * m.precision * m.recall /
                                    (m.precision + m.recall))
                        .epsilon(1e-15));
  }
}

TEST_CASE("roc auc basics") {
  CHECK(roc_auc({0.9, 0.8, 0.7, 0.1}, {1, 1, 0, 0}) == 1.0);
  CHECK(roc_auc({0.5, 0.5, 0.5, 0.5}, {1, 1, 0, 0}) == 0.5);
  // Frozen from pairwise enumeration: 3 of 4 positive-negative pairs win.
  CHECK(roc_auc({0.8, 0.3, 0.5, 0.2}, {1, 1, 0, 0}) == doctest::Approx(0.75));
  CHECK_THROWS_AS(roc_auc({0.5, 0.6}, {1, 1}), Error);
}

TEST_CASE("rank auc equals trapezoidal roc integration") {
  Rng rng(23);
  for (int iter = 0; iter < 200; ++iter) {
    const int n = 5 + static_cast<int>(rng.uniform_int(0, 60));
    std::vector<double> scores;
    std::vector<int> labels;
    int n_pos = 0;
    for (int i = 0; i < n; ++i) {
      // Coarse grid of score values forces plenty of ties.
      scores.push_back(rng.uniform_int(0, 9) / 10.0);
      labels.push_back(rng.bernoulli(0.4) ? 1 : 0);
      n_pos += labels.back();
    }
    if (n_pos == 0) labels[0] = 1;
    if (n_pos == n) labels[0] = 0;
    const double rank = roc_auc(scores, labels);
    const double trap = trapezoid_auc(scores, labels);
    CHECK(std::abs(rank - trap) <= 1e-12);
  }
}

TEST_CASE("auc properties: joint permutation and score negation") {
  Rng rng(31);
  std::vector<double> scores;
  std::vector<int> labels;
  for (int i = 0; i < 40; ++i) {
    scores.push_back(rng.uniform());
    labels.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  labels[0] = 1;
  labels[1] = 0;
  const double base = roc_auc(scores, labels);

  std::vector<size_t> perm(scores.size());
  for (size_t i = 0; i < perm.size(); ++i) perm[i] = i;
  std::vector<std::int64_t> as_int(perm.begin(), perm.end());
  rng.shuffle(as_int);
  std::vector<double> ps(scores.size());
  std::vector<int> pl(labels.size());
  for (size_t i = 0; i < perm.size(); ++i) {
    ps[i] = scores[static_cast<size_t>(as_int[i])];
    pl[i] = labels[static_cast<size_t>(as_int[i])];
  }
  CHECK(roc_auc(ps, pl) == doctest::Approx(base).epsilon(1e-15));

  std::vector<double> negated = scores;
  for (double& s : negated) s = -s;
  CHECK(roc_auc(negated, labels) == doctest::Approx(1.0 - base).epsilon(1e-12));
}

TEST_CASE("youden j") {
  CHECK(youden_j(1.0, 1.0) == doctest::Approx(1.0));
  CHECK(youden_j(0.5, 0.5) == doctest::Approx(0.0));
  CHECK(youden_j(0.85, 0.47) == doctest::Approx(0.32));
}

TEST_CASE("evaluate handles single-class evaluation sets") {
  const MetricsReport r = evaluate({1, 1, 0}, {0.9, 0.8, 0.2}, {1, 1, 1});
  CHECK_FALSE(r.auc_defined);
  CHECK(r.recall == doctest::Approx(2.0 / 3.0));
  CHECK_FALSE(r.specificity_defined);
}
