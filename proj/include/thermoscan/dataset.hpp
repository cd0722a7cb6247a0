#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "thermoscan/common.hpp"

namespace thermoscan {

/// Feature matrix with named columns and 0-based integer class labels.
struct TabularDataset {
  std::vector<std::string> feature_names;
  Matrix rows;
  std::vector<int> labels;
  std::vector<std::string> label_names;

  std::size_t size() const { return rows.rows(); }
  std::size_t width() const { return rows.cols(); }

  /// Throws DataError when a structural invariant is broken.
  void validate() const;

  std::vector<std::size_t> class_counts() const;
  std::vector<std::vector<std::size_t>> indices_by_class() const;

  /// Rows at `indices`, in that order; names are carried over.
  TabularDataset subset(std::span<const std::size_t> indices) const;

  bool operator==(const TabularDataset&) const = default;
};

/// Rows of `a` followed by rows of `b`; both must share columns and labels.
TabularDataset concat(const TabularDataset& a, const TabularDataset& b);

/// Comma-separated file with a header row. Labels are encoded in order of
/// first appearance; every other cell must parse as a finite real.
/// Columns named in `ignore_columns` (e.g. a case id) are skipped.
TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const std::vector<std::string>& ignore_columns = {});

/// Writes features then a final label column; values use round-trip precision.
void save_csv(const std::filesystem::path& path, const TabularDataset& ds,
              const std::string& label_column = "label");

/// Reorders label ids of a two-class dataset so `positive_name` becomes 1.
TabularDataset with_positive_label(const TabularDataset& ds, const std::string& positive_name);

struct Split {
  TabularDataset train;
  TabularDataset test;
  std::vector<std::size_t> train_indices;
  std::vector<std::size_t> test_indices;
};

/// Test rows total round(n * test_fraction). With `stratified`, each class
/// receives its largest-remainder share and keeps at least one row per side.
Split train_test_split(const TabularDataset& ds, double test_fraction, std::uint64_t seed,
                       bool stratified = true);

struct FoldPlan {
  int k = 0;
  std::vector<int> assignments;

  std::vector<std::size_t> validation_indices(int fold) const;
  std::vector<std::size_t> training_indices(int fold) const;
};

FoldPlan stratified_kfold(const TabularDataset& ds, int k, std::uint64_t seed);

enum class EitLabelMode { two, three, six };

EitLabelMode eit_label_mode_from_int(int labels);

/// Collapses the six EIT tissue classes (car, fad, mas, gla, con, adi).
/// two: car -> 1, others -> 0. three: car -> 2, fad/mas/gla -> 1, con/adi -> 0.
/// With drop_con_adi (two-class mode only), connective and adipose rows are removed.
TabularDataset relabel_eit(const TabularDataset& ds, EitLabelMode mode, bool drop_con_adi = false);

}  // namespace thermoscan
