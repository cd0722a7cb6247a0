#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "thermoscan/dataset.hpp"

namespace thermoscan {

/// Pearson correlations between feature columns, optionally with the label
/// appended as a final column. Pairs involving a constant column are NaN.
struct CorrelationMatrix {
  std::vector<std::string> names;
  Matrix r;
  std::vector<bool> constant;
};

CorrelationMatrix pearson_matrix(const TabularDataset& ds, bool include_label = false);

/// Correlation of each feature with the label (last column of the full matrix).
std::vector<double> label_correlations(const TabularDataset& ds);

struct Projection2D {
  Matrix coords;                          // n x 2
  Matrix components;                      // 2 x d, rows orthonormal
  std::vector<double> explained_variance; // eigenvalues of the standardised covariance
  std::vector<double> explained_ratio;    // share of total variance
  std::vector<double> means;
  std::vector<double> scales;
  bool rank_deficient = false;            // second component carries no variance
};

/// PCA on internally standardised columns; components from power iteration
/// with deflation (tol 1e-10). Each component's largest-magnitude loading is
/// made positive. Needs n > 2.
Projection2D pca_2d(const TabularDataset& ds);

/// Mean squared reconstruction error in standardised space using the first
/// `components` (0, 1 or 2) principal directions.
double pca_reconstruction_error(const TabularDataset& ds, const Projection2D& p, int components);

void write_correlation_csv(const std::filesystem::path& path, const CorrelationMatrix& c);
/// Columns: pc1, pc2, label.
void write_projection_csv(const std::filesystem::path& path, const Projection2D& p, const TabularDataset& ds);
/// Long-format pair table (i, j, feature_i, feature_j, r) for scatter-grid plots,
/// plus the raw data with labels for the scatter panels.
void write_pair_grid_csv(const std::filesystem::path& path, const TabularDataset& ds);

}  // namespace thermoscan
