#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "agirisk/error.hpp"
#include "agirisk/forest.hpp"
#include "agirisk/rng.hpp"

using namespace agirisk;

namespace {

Matrix separable_data(int n, Rng& rng, std::vector<int>& labels) {
  Matrix x(n, 4);
  labels.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const int y = i % 2;
    labels[static_cast<size_t>(i)] = y;
    x(i, 0) = y == 1 ? rng.uniform(2.0, 3.0) : rng.uniform(0.0, 1.0);
    for (int c = 1; c < 4; ++c) x(i, c) = rng.uniform(0.0, 1.0);
  }
  return x;
}

}  // namespace

TEST_CASE("gini impurity") {
  CHECK(gini({10, 0}) == doctest::Approx(0.0));
  CHECK(gini({5, 5}) == doctest::Approx(0.5));
  CHECK(gini({3, 1}) == doctest::Approx(0.375));
  CHECK_THROWS_AS(gini({0, 0}), Error);
}

TEST_CASE("single tree memorizes distinct separable points") {
  Matrix x(4, 2);
  x << 0.0, 0.0, 1.0, 0.0, 2.0, 1.0, 3.0, 1.0;
  const std::vector<int> y = {0, 0, 1, 1};
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_features = 2;
  cfg.seed = 3;
  const Forest forest = fit_forest(x, y, cfg);
  for (int i = 0; i < 4; ++i)
    CHECK(predict_forest(forest, x.row(i).transpose()).cls == y[static_cast<size_t>(i)]);
}

TEST_CASE("forest is deterministic per seed") {
  Rng rng(5);
  std::vector<int> labels;
  const Matrix x = separable_data(60, rng, labels);
  ForestConfig cfg;
  cfg.n_trees = 15;
  cfg.max_features = 2;
  cfg.seed = 42;
  const Forest a = fit_forest(x, labels, cfg);
  const Forest b = fit_forest(x, labels, cfg);
  REQUIRE(a.trees.size() == b.trees.size());
  for (size_t t = 0; t < a.trees.size(); ++t) {
    REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
    for (size_t k = 0; k < a.trees[t].nodes.size(); ++k) {
      CHECK(a.trees[t].nodes[k].feature == b.trees[t].nodes[k].feature);
      CHECK(a.trees[t].nodes[k].threshold == b.trees[t].nodes[k].threshold);
    }
  }
  for (int i = 0; i < x.rows(); ++i) {
    CHECK(predict_forest(a, x.row(i).transpose()).p_agitation ==
          predict_forest(b, x.row(i).transpose()).p_agitation);
  }
}

TEST_CASE("root counts cover the whole bootstrap sample") {
  Rng rng(9);
  std::vector<int> labels;
  const Matrix x = separable_data(50, rng, labels);
  ForestConfig cfg;
  cfg.n_trees = 5;
  cfg.max_features = 4;
  cfg.seed = 1;
  const Forest forest = fit_forest(x, labels, cfg);
  for (const DecisionTree& tree : forest.trees) {
    const TreeNode& root = tree.nodes[0];
    CHECK(root.counts[0] + root.counts[1] == 50);
    // Children partition their parent's counts.
    for (const TreeNode& node : tree.nodes) {
      if (node.is_leaf) continue;
      const TreeNode& l = tree.nodes[static_cast<size_t>(node.left)];
      const TreeNode& r = tree.nodes[static_cast<size_t>(node.right)];
      CHECK(l.counts[0] + r.counts[0] == node.counts[0]);
      CHECK(l.counts[1] + r.counts[1] == node.counts[1]);
    }
  }
}

TEST_CASE("pure nodes become leaves") {
  Matrix x(6, 1);
  x << 0, 1, 2, 3, 4, 5;
  const std::vector<int> y = {0, 0, 0, 0, 0, 1};
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_features = 1;
  cfg.seed = 7;
  const Forest forest = fit_forest(x, y, cfg);
  for (const TreeNode& node : forest.trees[0].nodes) {
    if (!node.is_leaf) continue;
    // A leaf with a single class never has absent counts for that class.
    CHECK(node.counts[0] + node.counts[1] > 0);
  }
}

TEST_CASE("depth-1 tree separates a perfectly separating feature") {
  Rng rng(13);
  std::vector<int> labels;
  const Matrix x = separable_data(40, rng, labels);
  ForestConfig cfg;
  cfg.n_trees = 1;
  cfg.max_features = 4;  // always sees the separating feature
  cfg.max_depth = 1;
  cfg.seed = 2;
  const Forest forest = fit_forest(x, labels, cfg);
  int errors = 0;
  for (int i = 0; i < x.rows(); ++i)
    errors += predict_forest(forest, x.row(i).transpose()).cls !=
              labels[static_cast<size_t>(i)];
  CHECK(errors == 0);
}

TEST_CASE("vote counting and tie rule") {
  // Hand-built forest: leaves vote by their stored counts.
  const auto leaf_tree = [](int cls) {
    DecisionTree t;
    TreeNode n;
    n.is_leaf = true;
    n.counts[cls] = 1;
    t.nodes.push_back(n);
    return t;
  };
  Forest forest;
  for (int i = 0; i < 60; ++i) forest.trees.push_back(leaf_tree(1));
  for (int i = 0; i < 40; ++i) forest.trees.push_back(leaf_tree(0));
  Vector sample = Vector::Zero(4);
  const ForestPrediction p = predict_forest(forest, sample);
  CHECK(p.cls == kAgitation);
  CHECK(p.p_agitation == doctest::Approx(0.60));

  Forest tied;
  for (int i = 0; i < 5; ++i) {
    tied.trees.push_back(leaf_tree(1));
    tied.trees.push_back(leaf_tree(0));
  }
  CHECK(predict_forest(tied, sample).cls == kNoAgitation);

  Forest single;
  single.trees.push_back(leaf_tree(1));
  const double p1 = predict_forest(single, sample).p_agitation;
  CHECK((p1 == 0.0 || p1 == 1.0));
}

TEST_CASE("single-class data is rejected") {
  Matrix x(4, 2);
  x.setRandom();
  ForestConfig cfg;
  cfg.max_features = 2;
  CHECK_THROWS_AS(fit_forest(x, {1, 1, 1, 1}, cfg), Error);
}
