#include "thermoscan/tree.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thermoscan/kernels.hpp"
#include "thermoscan/rng.hpp"

namespace thermoscan {
namespace {

double gini(double n0, double n1) {
  const double n = n0 + n1;
  if (n == 0) return 0.0;
  const double p0 = n0 / n, p1 = n1 / n;
  return 1.0 - p0 * p0 - p1 * p1;
}

double gini_gain_counts(double l0, double l1, double r0, double r1) {
  const double nl = l0 + l1, nr = r0 + r1, n = nl + nr;
  return gini(l0 + r0, l1 + r1) - nl / n * gini(l0, l1) - nr / n * gini(r0, r1);
}

double class1_fraction(std::span<const int> y, std::span<const std::size_t> idx) {
  if (idx.empty()) return 0.0;
  std::size_t pos = 0;
  for (auto i : idx) pos += y[i] == 1 ? 1 : 0;
  return static_cast<double>(pos) / static_cast<double>(idx.size());
}

}  // namespace

double Tree::predict(std::span<const double> x) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const auto& n = nodes[static_cast<std::size_t>(node)];
    node = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
  }
  return nodes[static_cast<std::size_t>(node)].value;
}

int Tree::depth() const {
  std::vector<int> depth(nodes.size(), 0);
  int best = 0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    best = std::max(best, depth[i]);
    if (!nodes[i].is_leaf()) {
      depth[static_cast<std::size_t>(nodes[i].left)] = depth[i] + 1;
      depth[static_cast<std::size_t>(nodes[i].right)] = depth[i] + 1;
    }
  }
  return best;
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(std::count_if(nodes.begin(), nodes.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

nlohmann::json Tree::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& n : nodes) {
    if (n.is_leaf()) {
      arr.push_back({{"value", n.value}});
    } else {
      arr.push_back({{"feature", n.feature}, {"threshold", n.threshold}, {"left", n.left}, {"right", n.right},
                     {"value", n.value}});
    }
  }
  return arr;
}

Tree Tree::from_json(const nlohmann::json& j) {
  Tree t;
  for (const auto& n : j) {
    TreeNode node;
    node.value = n.at("value").get<double>();
    if (n.contains("feature")) {
      node.feature = n.at("feature").get<int>();
      node.threshold = n.at("threshold").get<double>();
      node.left = n.at("left").get<int>();
      node.right = n.at("right").get<int>();
    }
    t.nodes.push_back(node);
  }
  for (const auto& n : t.nodes) {
    if (!n.is_leaf() && (n.left <= 0 || n.right <= 0 || static_cast<std::size_t>(std::max(n.left, n.right)) >= t.nodes.size())) {
      throw DataError("tree: child index out of range");
    }
  }
  if (t.nodes.empty()) throw DataError("tree: no nodes");
  return t;
}

double gini_gain(const Matrix& x, std::span<const int> y, std::span<const std::size_t> idx, int feature,
                 double threshold) {
  double l0 = 0, l1 = 0, r0 = 0, r1 = 0;
  for (auto i : idx) {
    const bool left = x(i, static_cast<std::size_t>(feature)) < threshold;
    const bool pos = y[i] == 1;
    (left ? (pos ? l1 : l0) : (pos ? r1 : r0)) += 1;
  }
  if (l0 + l1 == 0 || r0 + r1 == 0) return 0.0;
  return gini_gain_counts(l0, l1, r0, r1);
}

std::optional<GiniSplit> best_gini_split(const Matrix& x, std::span<const int> y,
                                         std::span<const std::size_t> idx,
                                         std::span<const std::size_t> features, int min_samples_leaf) {
  std::vector<std::size_t> feats(features.begin(), features.end());
  std::sort(feats.begin(), feats.end());
  double total0 = 0, total1 = 0;
  for (auto i : idx) (y[i] == 1 ? total1 : total0) += 1;

  std::optional<GiniSplit> best;
  std::vector<std::size_t> order(idx.begin(), idx.end());
  const auto min_leaf = static_cast<double>(std::max(1, min_samples_leaf));
  for (auto f : feats) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = x(a, f), vb = x(b, f);
      return va < vb || (va == vb && y[a] < y[b]);
    });
    double l0 = 0, l1 = 0;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      (y[order[k]] == 1 ? l1 : l0) += 1;
      const double v = x(order[k], f), next = x(order[k + 1], f);
      if (v == next) continue;
      const double nl = l0 + l1, nr = total0 + total1 - nl;
      if (nl < min_leaf || nr < min_leaf) continue;
      const double gain = gini_gain_counts(l0, l1, total0 - l0, total1 - l1);
      double threshold = 0.5 * (v + next);
      if (!(threshold > v)) threshold = next;  // adjacent doubles
      if (!best || gain > best->gain + 1e-12) {
        best = GiniSplit{static_cast<int>(f), threshold, gain};
      }
    }
  }
  return best;
}

Tree grow_gini_tree(const Matrix& x, std::span<const int> y, std::vector<std::size_t> idx, const TreeParams& params,
                    double colsample, std::uint64_t seed) {
  const std::size_t d = x.cols();
  std::size_t n_features = d;
  if (colsample > 0.0 && colsample < 1.0) {
    n_features = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(colsample * static_cast<double>(d))));
  }
  auto rng = make_rng(seed, {0x7EEu});
  std::vector<std::size_t> all_features(d);
  std::iota(all_features.begin(), all_features.end(), 0);

  Tree tree;
  struct Pending {
    int node;
    int depth;
    std::vector<std::size_t> rows;
  };
  tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, class1_fraction(y, idx)});
  std::vector<Pending> stack;
  stack.push_back({0, 0, std::move(idx)});

  while (!stack.empty()) {
    Pending cur = std::move(stack.back());
    stack.pop_back();
    const double value = tree.nodes[static_cast<std::size_t>(cur.node)].value;
    const bool pure = value == 0.0 || value == 1.0;
    const bool depth_ok = params.max_depth < 0 || cur.depth < params.max_depth;
    if (pure || !depth_ok || cur.rows.size() < 2 * static_cast<std::size_t>(std::max(1, params.min_samples_leaf))) {
      continue;
    }

    std::vector<std::size_t> candidates = all_features;
    if (n_features < d) {
      for (std::size_t i = 0; i < n_features; ++i) {
        std::swap(candidates[i], candidates[i + uniform_index(rng, d - i)]);
      }
      candidates.resize(n_features);
    }
    auto split = best_gini_split(x, y, cur.rows, candidates, params.min_samples_leaf);
    if (!split || !(split->gain > params.min_gain)) continue;

    std::vector<std::size_t> left, right;
    for (auto i : cur.rows) {
      (x(i, static_cast<std::size_t>(split->feature)) < split->threshold ? left : right).push_back(i);
    }
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, class1_fraction(y, left)});
    tree.nodes.push_back(TreeNode{-1, 0.0, -1, -1, class1_fraction(y, right)});
    auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
    node.feature = split->feature;
    node.threshold = split->threshold;
    node.left = left_id;
    node.right = left_id + 1;
    // Right pushed first so the left subtree is expanded first.
    stack.push_back({left_id + 1, cur.depth + 1, std::move(right)});
    stack.push_back({left_id, cur.depth + 1, std::move(left)});
  }
  return tree;
}

double DecisionTree::predict_score(std::span<const double> x) const {
  check_width(x);
  return tree_.predict(x);
}

nlohmann::json DecisionTree::to_json() const { return {{"width", width_}, {"tree", tree_.to_json()}}; }

DecisionTree train_tree(const TabularDataset& ds, const TreeParams& params) {
  require_binary_labels(ds);
  if (ds.size() == 0) throw DataError("train_tree: empty dataset");
  if (params.min_samples_leaf < 1) throw ConfigError("train_tree: min_samples_leaf must be >= 1");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return DecisionTree(grow_gini_tree(ds.rows, ds.labels, std::move(idx), params, 1.0, 0), ds.width());
}

double RandomForest::predict_score(std::span<const double> x) const {
  check_width(x);
  double s = 0.0;
  for (const auto& t : trees_) s += t.predict(x);
  return s / static_cast<double>(trees_.size());
}

nlohmann::json RandomForest::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"width", width_}, {"trees", trees}};
}

RandomForest train_forest(const TabularDataset& ds, const ForestParams& params) {
  require_binary_labels(ds);
  if (params.n_trees < 1) throw ConfigError("train_forest: n_trees must be >= 1");
  if (params.colsample < 0.0 || params.colsample > 1.0) throw ConfigError("train_forest: colsample must lie in [0,1]");
  const std::size_t n = ds.size(), d = ds.width();
  const double colsample =
      params.colsample > 0.0 ? params.colsample : std::sqrt(static_cast<double>(d)) / static_cast<double>(d);

  std::vector<Tree> trees(static_cast<std::size_t>(params.n_trees));
  const auto count = static_cast<std::ptrdiff_t>(trees.size());
  const bool parallel = kernels::default_exec() == kernels::Exec::parallel && !omp_in_parallel();
#pragma omp parallel for schedule(dynamic) num_threads(kernels::max_threads()) if (parallel)
  for (std::ptrdiff_t t = 0; t < count; ++t) {
    const auto tree_seed = derive_seed(params.seed, {0xF0Eu, static_cast<std::uint64_t>(t)});
    std::vector<std::size_t> idx(n);
    if (params.bootstrap) {
      auto rng = make_rng(tree_seed, {0xB00u});
      for (auto& i : idx) i = uniform_index(rng, n);
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    trees[static_cast<std::size_t>(t)] = grow_gini_tree(ds.rows, ds.labels, std::move(idx), params.tree, colsample, tree_seed);
  }
  return RandomForest(std::move(trees), d);
}

}  // namespace thermoscan
