#include "agirisk/metrics.hpp"

#include <algorithm>
#include <numeric>

#include "agirisk/error.hpp"

namespace agirisk {

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels) {
  if (predictions.size() != labels.size())
    throw Error("confusion: predictions and labels differ in length");
  if (predictions.empty()) throw Error("confusion: empty inputs");
  ConfusionMatrix cm;
  for (size_t i = 0; i < labels.size(); ++i) {
    const bool pred = predictions[i] == kAgitation;
    const bool truth = labels[i] == kAgitation;
    if (pred && truth) ++cm.tp;
    else if (pred && !truth) ++cm.fp;
    else if (!pred && truth) ++cm.fn;
    else ++cm.tn;
  }
  return cm;
}

BasicMetrics basic_metrics(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw Error("basic_metrics: empty confusion matrix");
  BasicMetrics m;
  m.accuracy = static_cast<double>(cm.tp + cm.tn) / cm.total();
  if (cm.tp + cm.fp > 0) {
    m.precision = static_cast<double>(cm.tp) / (cm.tp + cm.fp);
  } else {
    m.precision_defined = false;
  }
  if (cm.tp + cm.fn > 0) {
    m.recall = static_cast<double>(cm.tp) / (cm.tp + cm.fn);
  } else {
    m.recall_defined = false;
  }
  if (cm.tn + cm.fp > 0) {
    m.specificity = static_cast<double>(cm.tn) / (cm.tn + cm.fp);
  } else {
    m.specificity_defined = false;
  }
  if (m.precision_defined && m.recall_defined && m.precision + m.recall > 0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_defined = m.precision_defined && m.recall_defined;
    m.f1 = 0.0;
  }
  return m;
}

double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels) {
  if (scores.size() != labels.size())
    throw Error("roc_auc: scores and labels differ in length");
  const auto n = scores.size();
  std::int64_t n_pos = 0;
  for (int y : labels) n_pos += y == kAgitation;
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw Error("roc_auc: labels are single-class");

  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });

  // Sum of positive ranks with ties averaged (1-based ranks).
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) +
                                   static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]] == kAgitation) rank_sum_pos += avg_rank;
    i = j + 1;
  }
  const double u = rank_sum_pos -
                   static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

MetricsReport evaluate(const std::vector<int>& predictions,
                       const std::vector<double>& scores,
                       const std::vector<int>& labels) {
  MetricsReport r;
  r.cm = confusion(predictions, labels);
  const BasicMetrics b = basic_metrics(r.cm);
  r.accuracy = b.accuracy;
  r.precision = b.precision;
  r.recall = b.recall;
  r.f1 = b.f1;
  r.specificity = b.specificity;
  r.precision_defined = b.precision_defined;
  r.recall_defined = b.recall_defined;
  r.f1_defined = b.f1_defined;
  r.specificity_defined = b.specificity_defined;
  r.youden_j = youden_j(b.recall, b.specificity);
  std::int64_t n_pos = r.cm.tp + r.cm.fn;
  std::int64_t n_neg = r.cm.tn + r.cm.fp;
  if (n_pos > 0 && n_neg > 0) {
    r.auc = roc_auc(scores, labels);
  } else {
    r.auc_defined = false;
  }
  return r;
}

}  // namespace agirisk
