#pragma once

#include <cstdint>
#include <vector>

#include "agirisk/types.hpp"

namespace agirisk {

// Positive class = agitation (label 1).
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t fn = 0;
  std::int64_t tn = 0;

  std::int64_t total() const { return tp + fp + fn + tn; }

  ConfusionMatrix& operator+=(const ConfusionMatrix& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
};

// Ratios with a zero denominator come back as 0 with the matching
// *_defined flag cleared; a degenerate split must not abort a sweep.
struct BasicMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double specificity = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
  bool specificity_defined = true;
};

struct MetricsReport {
  ConfusionMatrix cm;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auc = 0.0;
  double youden_j = 0.0;
  bool precision_defined = true;
  bool recall_defined = true;
  bool f1_defined = true;
  bool specificity_defined = true;
  bool auc_defined = true;
  double specificity = 0.0;
};

ConfusionMatrix confusion(const std::vector<int>& predictions,
                          const std::vector<int>& labels);

BasicMetrics basic_metrics(const ConfusionMatrix& cm);

// Probability that a random positive outscores a random negative, ties
// counted 1/2 (rank / Mann-Whitney formulation). Throws Error when labels
// are single-class.
double roc_auc(const std::vector<double>& scores,
               const std::vector<int>& labels);

constexpr double youden_j(double sensitivity, double specificity) {
  return sensitivity + specificity - 1.0;
}

// Full report from hard predictions plus scores. Single-class label sets
// yield auc = 0 with auc_defined = false instead of throwing.
MetricsReport evaluate(const std::vector<int>& predictions,
                       const std::vector<double>& scores,
                       const std::vector<int>& labels);

}  // namespace agirisk
