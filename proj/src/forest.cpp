#include "agirisk/forest.hpp"

#include <algorithm>
#include <numeric>

#include "agirisk/error.hpp"
#include "agirisk/rng.hpp"

namespace agirisk {
namespace {

constexpr std::uint64_t kBootstrapStream = 0x626f6f74;  // "boot"
constexpr std::uint64_t kFeatureStream = 0x66656174;    // "feat"

double gini_from_counts(std::int64_t c0, std::int64_t c1) {
  const double n = static_cast<double>(c0 + c1);
  const double p0 = static_cast<double>(c0) / n;
  const double p1 = static_cast<double>(c1) / n;
  return 1.0 - (p0 * p0 + p1 * p1);
}

struct TreeBuilder {
  const Matrix& features;
  const std::vector<int>& labels;
  const ForestConfig& config;
  Rng& feature_rng;
  DecisionTree tree;

  // Draw max_features distinct feature indices (partial Fisher-Yates).
  std::vector<int> draw_features() {
    const int d = static_cast<int>(features.cols());
    std::vector<int> pool(static_cast<size_t>(d));
    std::iota(pool.begin(), pool.end(), 0);
    const int k = std::min(config.max_features, d);
    for (int i = 0; i < k; ++i) {
      const auto j = feature_rng.uniform_int(i, d - 1);
      std::swap(pool[static_cast<size_t>(i)], pool[static_cast<size_t>(j)]);
    }
    pool.resize(static_cast<size_t>(k));
    return pool;
  }

  int build(std::vector<int>& rows, int depth) {
    std::int64_t c0 = 0, c1 = 0;
    for (int r : rows) (labels[static_cast<size_t>(r)] == kAgitation ? c1 : c0)++;

    const int node_id = static_cast<int>(tree.nodes.size());
    tree.nodes.emplace_back();
    tree.nodes[static_cast<size_t>(node_id)].counts[0] = c0;
    tree.nodes[static_cast<size_t>(node_id)].counts[1] = c1;

    const bool pure = c0 == 0 || c1 == 0;
    const bool too_small =
        static_cast<int>(rows.size()) < config.min_samples_split;
    const bool at_depth = config.max_depth > 0 && depth >= config.max_depth;
    if (pure || too_small || at_depth) return node_id;

    const double parent_gini = gini_from_counts(c0, c1);
    double best_gain = 0.0;
    int best_feature = -1;
    double best_threshold = 0.0;

    std::vector<std::pair<double, int>> column(rows.size());
    for (int f : draw_features()) {
      for (size_t i = 0; i < rows.size(); ++i) {
        const int r = rows[i];
        column[i] = {features(r, f), labels[static_cast<size_t>(r)]};
      }
      std::sort(column.begin(), column.end());
      // Scan midpoints between consecutive distinct values.
      std::int64_t l0 = 0, l1 = 0;
      for (size_t i = 0; i + 1 < column.size(); ++i) {
        (column[i].second == kAgitation ? l1 : l0)++;
        if (column[i].first == column[i + 1].first) continue;
        const std::int64_t r0 = c0 - l0, r1 = c1 - l1;
        const double nl = static_cast<double>(l0 + l1);
        const double nr = static_cast<double>(r0 + r1);
        const double child =
            (nl * gini_from_counts(l0, l1) + nr * gini_from_counts(r0, r1)) /
            static_cast<double>(rows.size());
        const double gain = parent_gini - child;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = f;
          best_threshold = 0.5 * (column[i].first + column[i + 1].first);
        }
      }
    }
    if (best_feature < 0) return node_id;  // no improving split drawn

    std::vector<int> left_rows, right_rows;
    left_rows.reserve(rows.size());
    right_rows.reserve(rows.size());
    for (int r : rows) {
      if (features(r, best_feature) <= best_threshold)
        left_rows.push_back(r);
      else
        right_rows.push_back(r);
    }
    if (left_rows.empty() || right_rows.empty()) return node_id;

    rows.clear();
    rows.shrink_to_fit();
    const int left_id = build(left_rows, depth + 1);
    const int right_id = build(right_rows, depth + 1);
    TreeNode& node = tree.nodes[static_cast<size_t>(node_id)];
    node.is_leaf = false;
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = left_id;
    node.right = right_id;
    return node_id;
  }
};

}  // namespace

void ForestConfig::validate(int n_features) const {
  if (n_trees < 1) throw ConfigError("forest: n_trees must be >= 1");
  if (max_features < 1 || max_features > n_features)
    throw ConfigError("forest: max_features out of [1, n_features]");
  if (min_samples_split < 2)
    throw ConfigError("forest: min_samples_split must be >= 2");
}

double gini(const std::vector<std::int64_t>& counts) {
  std::int64_t total = 0;
  for (std::int64_t c : counts) {
    if (c < 0) throw Error("gini: negative count");
    total += c;
  }
  if (total == 0) throw Error("gini: zero total count");
  double sum_sq = 0.0;
  for (std::int64_t c : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(total);
    sum_sq += p * p;
  }
  return 1.0 - sum_sq;
}

Forest fit_forest(const Matrix& features, const std::vector<int>& labels,
                  const ForestConfig& config) {
  const auto n = static_cast<int>(features.rows());
  if (n == 0 || labels.size() != static_cast<size_t>(n))
    throw Error("fit_forest: features/labels size mismatch");
  config.validate(static_cast<int>(features.cols()));
  bool has_pos = false, has_neg = false;
  for (int y : labels) (y == kAgitation ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw Error("fit_forest: training data is single-class");

  Forest forest;
  forest.config = config;
  forest.trees.resize(static_cast<size_t>(config.n_trees));
  for (int t = 0; t < config.n_trees; ++t) {
    Rng boot_rng(mix_seed({config.seed, kBootstrapStream,
                           static_cast<std::uint64_t>(t)}));
    std::vector<int> rows(static_cast<size_t>(n));
    for (auto& r : rows) r = static_cast<int>(boot_rng.uniform_int(0, n - 1));

    Rng feature_rng(mix_seed({config.seed, kFeatureStream,
                              static_cast<std::uint64_t>(t)}));
    TreeBuilder builder{features, labels, config, feature_rng, {}};
    builder.build(rows, 0);
    forest.trees[static_cast<size_t>(t)] = std::move(builder.tree);
  }
  return forest;
}

ForestPrediction predict_forest(const Forest& forest,
                                const Eigen::Ref<const Vector>& sample) {
  if (forest.trees.empty()) throw Error("predict_forest: empty forest");
  int votes_pos = 0;
  for (const DecisionTree& tree : forest.trees) {
    const TreeNode* node = &tree.nodes[0];
    while (!node->is_leaf) {
      const int next =
          sample[node->feature] <= node->threshold ? node->left : node->right;
      node = &tree.nodes[static_cast<size_t>(next)];
    }
    // Leaf vote: majority class, ties to the lower class index.
    if (node->counts[kAgitation] > node->counts[kNoAgitation]) ++votes_pos;
  }
  ForestPrediction p;
  p.p_agitation = static_cast<double>(votes_pos) /
                  static_cast<double>(forest.trees.size());
  p.cls = p.p_agitation > 0.5 ? kAgitation : kNoAgitation;
  return p;
}

}  // namespace agirisk
