#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "thermoscan/dataset.hpp"

namespace thermoscan {

enum class LeakageMode { paper_faithful, leak_free };

std::string to_string(LeakageMode mode);
LeakageMode leakage_mode_from_string(const std::string& name);

struct TransformRecipe {
  bool scale = false;
  bool augment = false;
  int augment_degree = 2;
  bool expand = false;
  bool polynomial = false;
  int polynomial_degree = 2;
  LeakageMode leakage_mode = LeakageMode::leak_free;

  void validate() const;
  /// "original", or enabled steps joined by '+', e.g. "scaled+expanded".
  std::string label() const;
  bool operator==(const TransformRecipe&) const = default;
};

/// Column statistics fitted on a training set (population standard deviation).
struct FittedScaler {
  std::vector<double> means;
  std::vector<double> stds;
  std::vector<bool> zero_variance;

  static FittedScaler fit(const TabularDataset& train);
  TabularDataset transform(const TabularDataset& ds) const;
  TabularDataset inverse_transform(const TabularDataset& ds) const;
};

struct ScaledPair {
  TabularDataset train;
  TabularDataset test;
  FittedScaler scaler;
};

/// Standardises train and test using statistics of train only. Constant
/// columns are centred and left at zero.
ScaledPair scale(const TabularDataset& train, const TabularDataset& test);

struct AugmentReport {
  std::size_t requested = 0;
  std::size_t dropped = 0;
};

/// Grows the set to `degree` times its size. Originals come first; each
/// synthetic row copies feature j from a uniformly drawn same-class donor,
/// redrawn (up to 100 times) until the row is new. Rows that stay duplicates
/// after the cap are dropped with a warning.
TabularDataset augment(const TabularDataset& train, int degree, std::uint64_t seed,
                       AugmentReport* report = nullptr);

/// Appends row-wise min, max, mean, median, std, skewness and excess kurtosis
/// of the original feature columns (d -> d + 7).
TabularDataset expand(const TabularDataset& ds);

/// Degree-2 polynomial features: originals, pairwise products fi*fj (i<j),
/// then squares fi*fi (d -> 2d + d(d-1)/2).
TabularDataset polynomial(const TabularDataset& ds, int degree = 2);

struct EngineeredPair {
  TabularDataset train;
  TabularDataset test;
};

/// Applies expand -> polynomial -> augment -> scale. In paper_faithful mode
/// augmentation runs on the pooled rows, which are then re-split with the
/// same test share; in leak_free mode only the training rows are augmented.
EngineeredPair apply_recipe(const TabularDataset& train, const TabularDataset& test,
                            const TransformRecipe& recipe, std::uint64_t seed);

}  // namespace thermoscan
