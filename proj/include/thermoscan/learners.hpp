#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "thermoscan/dataset.hpp"

namespace thermoscan {

/// A trained binary predictor. Scores lie in [0,1]; class 1 is "positive".
class Classifier {
 public:
  virtual ~Classifier() = default;

  virtual std::string family() const = 0;
  virtual std::size_t width() const = 0;
  /// Throws DataError when `x` does not have width() entries.
  virtual double predict_score(std::span<const double> x) const = 0;
  virtual nlohmann::json to_json() const = 0;

  virtual std::vector<double> predict_scores(const Matrix& rows) const;

 protected:
  void check_width(std::span<const double> x) const;
};

using ClassifierPtr = std::unique_ptr<Classifier>;

/// Throws DataError unless every label is 0 or 1.
void require_binary_labels(const TabularDataset& ds);

/// Per-column standardisation folded into the linear models so that their
/// optimisers see well-conditioned inputs; constant columns map to 0.
struct Standardizer {
  std::vector<double> means;
  std::vector<double> scales;

  static Standardizer fit(const Matrix& rows);
  void apply(std::span<const double> x, std::span<double> out) const;
};

// ---------------------------------------------------------------------------
// Linear regression used as a classifier (raw output clamped to [0,1]).

class LinearRegression final : public Classifier {
 public:
  LinearRegression(std::vector<double> weights, double bias)
      : weights_(std::move(weights)), bias_(bias) {}

  std::string family() const override { return "linear"; }
  std::size_t width() const override { return weights_.size(); }
  double predict_score(std::span<const double> x) const override;
  double predict_raw(std::span<const double> x) const;
  nlohmann::json to_json() const override;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  std::vector<double> weights_;
  double bias_;
};

/// Ridge solution of the normal equations; the bias is not penalised. A
/// singular system (l2 = 0) falls back to the minimum-norm solution.
LinearRegression train_linear(const TabularDataset& ds, double l2 = 0.0);
LinearRegression train_linear(const Matrix& x, std::span<const double> y, double l2 = 0.0);

// ---------------------------------------------------------------------------

class LogisticRegression final : public Classifier {
 public:
  LogisticRegression(std::vector<double> weights, double bias)
      : weights_(std::move(weights)), bias_(bias) {}

  std::string family() const override { return "logistic"; }
  std::size_t width() const override { return weights_.size(); }
  double predict_score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  /// Coefficients in the original feature space.
  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  /// Regularised training loss after each epoch (non-increasing).
  const std::vector<double>& loss_history() const { return loss_history_; }
  void set_loss_history(std::vector<double> h) { loss_history_ = std::move(h); }

 private:
  std::vector<double> weights_;
  double bias_;
  std::vector<double> loss_history_;
};

struct LogisticParams {
  double learning_rate = 0.5;
  int iterations = 500;
  double l2 = 1e-3;
};

/// Full-batch gradient descent on L2-regularised log-loss over standardised
/// inputs. A step that raises the loss is undone and the rate halved.
LogisticRegression train_logistic(const TabularDataset& ds, const LogisticParams& params = {});

// ---------------------------------------------------------------------------

class KNearestNeighbors final : public Classifier {
 public:
  KNearestNeighbors(Matrix points, std::vector<int> labels, int k);

  std::string family() const override { return "knn"; }
  std::size_t width() const override { return points_.cols(); }
  /// Fraction of the k nearest (Euclidean) training rows with label 1;
  /// distance ties go to the lower training index.
  double predict_score(std::span<const double> x) const override;
  nlohmann::json to_json() const override;

  int k() const { return k_; }
  const Matrix& points() const { return points_; }
  const std::vector<int>& labels() const { return labels_; }

 private:
  Matrix points_;
  std::vector<int> labels_;
  int k_;
};

KNearestNeighbors train_knn(const TabularDataset& ds, int k = 5);

// ---------------------------------------------------------------------------

class LinearSvm final : public Classifier {
 public:
  LinearSvm(std::vector<double> weights, double bias, double platt_a, double platt_b)
      : weights_(std::move(weights)), bias_(bias), platt_a_(platt_a), platt_b_(platt_b) {}

  std::string family() const override { return "svm"; }
  std::size_t width() const override { return weights_.size(); }
  /// Platt-calibrated probability 1 / (1 + exp(A * margin + B)).
  double predict_score(std::span<const double> x) const override;
  double margin(std::span<const double> x) const;
  nlohmann::json to_json() const override;

  const std::vector<double>& weights() const { return weights_; }
  double bias() const { return bias_; }
  double platt_a() const { return platt_a_; }
  double platt_b() const { return platt_b_; }

 private:
  std::vector<double> weights_;
  double bias_;
  double platt_a_;
  double platt_b_;
};

struct SvmParams {
  double c = 1.0;
  int iterations = 1000;
};

/// Hinge-loss subgradient descent (step 1/(lambda t), lambda = 1/(C n)) with
/// iterate averaging, followed by a Platt fit of the margins.
LinearSvm train_linear_svm(const TabularDataset& ds, const SvmParams& params = {});

/// Logistic sigmoid, numerically safe for large |z|.
double sigmoid(double z);

}  // namespace thermoscan
