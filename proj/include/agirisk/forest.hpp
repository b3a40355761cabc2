#pragma once

#include <cstdint>
#include <vector>

#include "agirisk/types.hpp"

namespace agirisk {

struct ForestConfig {
  int n_trees = 100;
  int max_features = 12;  // floor(sqrt(144))
  int min_samples_split = 2;
  int max_depth = 0;  // 0 = unlimited
  std::uint64_t seed = 0;

  void validate(int n_features) const;  // throws ConfigError
};

// Flat node storage; children referenced by index. A leaf keeps the class
// counts of the bootstrap samples that reached it.
struct TreeNode {
  bool is_leaf = true;
  int feature = -1;
  double threshold = 0.0;
  int left = -1;   // value <= threshold
  int right = -1;  // value > threshold
  std::int64_t counts[kNumClasses] = {0, 0};
};

struct DecisionTree {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct Forest {
  ForestConfig config;
  std::vector<DecisionTree> trees;
};

// 1 - sum(p_c^2); throws Error on a zero total.
double gini(const std::vector<std::int64_t>& counts);

// Rows of `features` are flattened samples. Each tree trains on a seeded
// bootstrap resample of size n; splits minimize Gini impurity over
// max_features randomly drawn features. Throws Error on single-class data.
Forest fit_forest(const Matrix& features, const std::vector<int>& labels,
                  const ForestConfig& config);

struct ForestPrediction {
  int cls = kNoAgitation;
  double p_agitation = 0.0;  // fraction of trees voting agitation
};

ForestPrediction predict_forest(const Forest& forest,
                                const Eigen::Ref<const Vector>& sample);

}  // namespace agirisk
