#pragma once

#include <cstdint>
#include <vector>

#include "thermoscan/tree.hpp"

namespace thermoscan {

/// Second-order gradient boosting on the logistic loss.
struct GbtParams {
  int n_estimators = 100;
  double learning_rate = 0.3;
  int max_depth = 6;              // -1: unlimited
  int num_leaves = 0;             // 0: no cap beyond max_depth
  double lambda = 1.0;            // L2 on leaf weights
  double alpha = 0.0;             // L1 on leaf weights (soft threshold of G)
  double gamma = 0.0;             // minimum loss reduction to split
  double subsample = 1.0;         // row fraction per tree, without replacement
  double colsample_bytree = 1.0;  // feature fraction per tree
  int min_child_samples = 1;
  double min_child_weight = 1.0;  // minimum hessian sum per child
  std::uint64_t seed = 0;

  void validate() const;
};

/// Defaults in the style of the depth-wise "XGB" booster.
GbtParams gbt_x_defaults();
/// Defaults in the style of the leaf-wise "LGBM" booster.
GbtParams gbt_l_defaults();

class GradientBoostedTrees final : public Classifier {
 public:
  GradientBoostedTrees(double base_score, std::vector<Tree> trees, std::size_t width)
      : base_score_(base_score), trees_(std::move(trees)), width_(width) {}

  std::string family() const override { return "gbt"; }
  std::size_t width() const override { return width_; }
  /// sigmoid(base_score + sum of tree outputs)
  double predict_score(std::span<const double> x) const override;
  double predict_raw(std::span<const double> x) const;
  /// Raw margin using only the first `rounds` trees.
  double predict_raw(std::span<const double> x, std::size_t rounds) const;
  nlohmann::json to_json() const override;

  double base_score() const { return base_score_; }
  const std::vector<Tree>& trees() const { return trees_; }

 private:
  double base_score_;
  std::vector<Tree> trees_;
  std::size_t width_;
};

GradientBoostedTrees train_gbt(const TabularDataset& ds, const GbtParams& params = {});

/// Mean logistic loss of the first `rounds` trees on `ds`.
double gbt_training_loss(const GradientBoostedTrees& model, const TabularDataset& ds, std::size_t rounds);

}  // namespace thermoscan
