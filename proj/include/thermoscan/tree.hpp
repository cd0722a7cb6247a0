#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "thermoscan/learners.hpp"

namespace thermoscan {

/// Axis-aligned binary tree. Internal nodes send x[feature] < threshold left.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  double predict(std::span<const double> x) const;
  int depth() const;
  std::size_t leaf_count() const;
  nlohmann::json to_json() const;
  static Tree from_json(const nlohmann::json& j);
};

struct TreeParams {
  int max_depth = -1;        // -1: unlimited
  int min_samples_leaf = 1;
  double min_gain = 0.0;     // split only when Gini gain exceeds this
};

struct GiniSplit {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

/// Gini gain of splitting rows `idx` on `feature` at `threshold`, counted directly.
double gini_gain(const Matrix& x, std::span<const int> y, std::span<const std::size_t> idx, int feature,
                 double threshold);

/// Best Gini split of rows `idx` over `features`. Candidate thresholds are the
/// midpoints of consecutive distinct values. Ties (within 1e-12) keep the lower
/// feature index, then the lower threshold.
std::optional<GiniSplit> best_gini_split(const Matrix& x, std::span<const int> y,
                                         std::span<const std::size_t> idx,
                                         std::span<const std::size_t> features, int min_samples_leaf);

class DecisionTree final : public Classifier {
 public:
  DecisionTree(Tree tree, std::size_t width) : tree_(std::move(tree)), width_(width) {}

  std::string family() const override { return "tree"; }
  std::size_t width() const override { return width_; }
  /// Fraction of class-1 training rows in the reached leaf.
  double predict_score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  const Tree& tree() const { return tree_; }

 private:
  Tree tree_;
  std::size_t width_;
};

DecisionTree train_tree(const TabularDataset& ds, const TreeParams& params = {});

/// Grows a Gini tree on (possibly repeated) rows `idx`. When `colsample` < 1,
/// each split considers a random subset of max(1, round(colsample * d)) features.
Tree grow_gini_tree(const Matrix& x, std::span<const int> y, std::vector<std::size_t> idx,
                    const TreeParams& params, double colsample, std::uint64_t seed);

struct ForestParams {
  int n_trees = 100;
  TreeParams tree;
  bool bootstrap = true;
  double colsample = 0.0;  // per-split feature fraction; 0 selects sqrt(d)/d
  std::uint64_t seed = 0;
};

class RandomForest final : public Classifier {
 public:
  RandomForest(std::vector<Tree> trees, std::size_t width) : trees_(std::move(trees)), width_(width) {}

  std::string family() const override { return "forest"; }
  std::size_t width() const override { return width_; }
  /// Mean of the member trees' leaf scores.
  double predict_score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  const std::vector<Tree>& trees() const { return trees_; }

 private:
  std::vector<Tree> trees_;
  std::size_t width_;
};

/// Bagged Gini trees; tree t draws from its own derived seed, so trees may be
/// grown in parallel without changing the result.
RandomForest train_forest(const TabularDataset& ds, const ForestParams& params = {});

}  // namespace thermoscan
