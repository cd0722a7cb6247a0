#include "thermoscan/learners.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <numeric>

#include "thermoscan/kernels.hpp"
#include "thermoscan/model_io.hpp"

namespace thermoscan {

double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

std::vector<double> Classifier::predict_scores(const Matrix& rows) const {
  std::vector<double> out(rows.rows());
  for (std::size_t i = 0; i < rows.rows(); ++i) out[i] = predict_score(rows.row(i));
  return out;
}

void Classifier::check_width(std::span<const double> x) const {
  if (x.size() != width()) {
    throw DataError(family() + ": input has " + std::to_string(x.size()) + " values, model expects " +
                    std::to_string(width()));
  }
}

void require_binary_labels(const TabularDataset& ds) {
  for (int y : ds.labels) {
    if (y != 0 && y != 1) throw DataError("learner requires binary labels (0/1)");
  }
}

Standardizer Standardizer::fit(const Matrix& rows) {
  Standardizer s;
  const std::size_t n = rows.rows(), d = rows.cols();
  s.means.assign(d, 0.0);
  s.scales.assign(d, 1.0);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += rows(i, j);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) ss += (rows(i, j) - mean) * (rows(i, j) - mean);
    const double sd = std::sqrt(ss / static_cast<double>(n));
    s.means[j] = mean;
    s.scales[j] = sd > 1e-12 * std::max(1.0, std::abs(mean)) ? 1.0 / sd : 0.0;
  }
  return s;
}

void Standardizer::apply(std::span<const double> x, std::span<double> out) const {
  for (std::size_t j = 0; j < x.size(); ++j) out[j] = (x[j] - means[j]) * scales[j];
}

// --- linear regression -------------------------------------------------------

double LinearRegression::predict_raw(std::span<const double> x) const {
  check_width(x);
  double z = bias_;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights_[j] * x[j];
  return z;
}

double LinearRegression::predict_score(std::span<const double> x) const {
  const double z = predict_raw(x);
  return std::isfinite(z) ? std::clamp(z, 0.0, 1.0) : (z > 0 ? 1.0 : 0.0);
}

nlohmann::json LinearRegression::to_json() const {
  return {{"weights", encode_f32(weights_)}, {"bias", bias_}};
}

LinearRegression train_linear(const Matrix& x, std::span<const double> y, double l2) {
  const std::size_t n = x.rows(), d = x.cols();
  if (n == 0) throw DataError("train_linear: empty dataset");
  if (y.size() != n) throw DataError("train_linear: target length mismatch");
  if (l2 < 0) throw ConfigError("train_linear: l2 must be non-negative");

  Eigen::MatrixXd xc(n, d);
  Eigen::VectorXd yc(n);
  Eigen::VectorXd means = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) means(static_cast<Eigen::Index>(j)) += x(i, j);
  means /= static_cast<double>(n);
  const double y_mean = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      xc(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = x(i, j) - means(static_cast<Eigen::Index>(j));
    }
    yc(static_cast<Eigen::Index>(i)) = y[i] - y_mean;
  }
  Eigen::MatrixXd gram = xc.transpose() * xc;
  gram.diagonal().array() += l2;
  const Eigen::VectorXd rhs = xc.transpose() * yc;
  // Complete orthogonal decomposition gives the minimum-norm solution when singular.
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(gram);
  const Eigen::VectorXd w = cod.solve(rhs);

  std::vector<double> weights(d);
  double bias = y_mean;
  for (std::size_t j = 0; j < d; ++j) {
    weights[j] = w(static_cast<Eigen::Index>(j));
    bias -= weights[j] * means(static_cast<Eigen::Index>(j));
  }
  return LinearRegression(std::move(weights), bias);
}

LinearRegression train_linear(const TabularDataset& ds, double l2) {
  std::vector<double> y(ds.labels.begin(), ds.labels.end());
  return train_linear(ds.rows, y, l2);
}

// --- logistic regression ---------------------------------------------------------

double LogisticRegression::predict_score(std::span<const double> x) const {
  check_width(x);
  double z = bias_;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights_[j] * x[j];
  return sigmoid(z);
}

nlohmann::json LogisticRegression::to_json() const {
  return {{"weights", encode_f32(weights_)}, {"bias", bias_}};
}

namespace {

double log1p_exp(double z) { return z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }

/// Mean log-loss + l2/2 ||w||^2 over standardised rows.
double logistic_loss(const Matrix& xs, std::span<const int> y, std::span<const double> w, double b, double l2) {
  double loss = 0.0;
  for (std::size_t i = 0; i < xs.rows(); ++i) {
    double z = b;
    auto r = xs.row(i);
    for (std::size_t j = 0; j < r.size(); ++j) z += w[j] * r[j];
    loss += log1p_exp(z) - (y[i] == 1 ? z : 0.0);
  }
  loss /= static_cast<double>(xs.rows());
  double reg = 0.0;
  for (double v : w) reg += v * v;
  return loss + 0.5 * l2 * reg;
}

Matrix standardise(const Matrix& rows, const Standardizer& s) {
  Matrix out(rows.rows(), rows.cols());
  for (std::size_t i = 0; i < rows.rows(); ++i) s.apply(rows.row(i), out.row(i));
  return out;
}

}  // namespace

LogisticRegression train_logistic(const TabularDataset& ds, const LogisticParams& params) {
  require_binary_labels(ds);
  if (ds.size() == 0) throw DataError("train_logistic: empty dataset");
  if (!(params.learning_rate > 0) || params.iterations < 0 || params.l2 < 0) {
    throw ConfigError("train_logistic: invalid parameters");
  }
  const std::size_t n = ds.size(), d = ds.width();
  const auto stdz = Standardizer::fit(ds.rows);
  const Matrix xs = standardise(ds.rows, stdz);

  std::vector<double> w(d, 0.0), grad(d), trial(d);
  double b = 0.0;
  double lr = params.learning_rate;
  double loss = logistic_loss(xs, ds.labels, w, b, params.l2);
  std::vector<double> history{loss};

  for (int it = 0; it < params.iterations; ++it) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto r = xs.row(i);
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * r[j];
      const double residual = sigmoid(z) - ds.labels[i];
      for (std::size_t j = 0; j < d; ++j) grad[j] += residual * r[j];
      grad_b += residual;
    }
    for (std::size_t j = 0; j < d; ++j) grad[j] = grad[j] / static_cast<double>(n) + params.l2 * w[j];
    grad_b /= static_cast<double>(n);

    // Backtrack: halve the rate until the step does not raise the loss.
    for (int attempt = 0; attempt < 60; ++attempt) {
      for (std::size_t j = 0; j < d; ++j) trial[j] = w[j] - lr * grad[j];
      const double trial_b = b - lr * grad_b;
      const double trial_loss = logistic_loss(xs, ds.labels, trial, trial_b, params.l2);
      if (trial_loss <= loss) {
        w.swap(trial);
        b = trial_b;
        loss = trial_loss;
        break;
      }
      lr *= 0.5;
    }
    history.push_back(loss);
  }

  // Fold the standardisation back into original-space coefficients.
  std::vector<double> weights(d);
  double bias = b;
  for (std::size_t j = 0; j < d; ++j) {
    weights[j] = w[j] * stdz.scales[j];
    bias -= weights[j] * stdz.means[j];
  }
  LogisticRegression model(std::move(weights), bias);
  model.set_loss_history(std::move(history));
  return model;
}

// --- k nearest neighbours ----------------------------------------------------------

KNearestNeighbors::KNearestNeighbors(Matrix points, std::vector<int> labels, int k)
    : points_(std::move(points)), labels_(std::move(labels)), k_(k) {
  if (k_ < 1 || static_cast<std::size_t>(k_) > points_.rows()) {
    throw ConfigError("knn: k must lie in [1, n]");
  }
}

double KNearestNeighbors::predict_score(std::span<const double> x) const {
  check_width(x);
  const std::size_t n = points_.rows();
  std::vector<double> dist(n);
  kernels::squared_distances(points_, x, dist);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const auto k = static_cast<std::size_t>(k_);
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  std::size_t positives = 0;
  for (std::size_t i = 0; i < k; ++i) positives += labels_[order[i]] == 1 ? 1 : 0;
  return static_cast<double>(positives) / static_cast<double>(k);
}

nlohmann::json KNearestNeighbors::to_json() const {
  return {{"k", k_},
          {"rows", points_.rows()},
          {"cols", points_.cols()},
          {"points", encode_f32(points_.data())},
          {"labels", labels_}};
}

KNearestNeighbors train_knn(const TabularDataset& ds, int k) {
  require_binary_labels(ds);
  return KNearestNeighbors(ds.rows, ds.labels, k);
}

// --- linear SVM ---------------------------------------------------------------------

double LinearSvm::margin(std::span<const double> x) const {
  check_width(x);
  double z = bias_;
  for (std::size_t j = 0; j < x.size(); ++j) z += weights_[j] * x[j];
  return z;
}

double LinearSvm::predict_score(std::span<const double> x) const {
  return sigmoid(-(platt_a_ * margin(x) + platt_b_));
}

nlohmann::json LinearSvm::to_json() const {
  return {{"weights", encode_f32(weights_)}, {"bias", bias_}, {"platt_a", platt_a_}, {"platt_b", platt_b_}};
}

namespace {

/// Platt scaling: fit P(y=1|f) = 1/(1+exp(A f + B)) by Newton's method with
/// the usual regularised targets.
std::pair<double, double> platt_fit(std::span<const double> f, std::span<const int> y) {
  const std::size_t n = f.size();
  double n_pos = 0, n_neg = 0;
  for (int v : y) (v == 1 ? n_pos : n_neg) += 1;
  const double hi = (n_pos + 1) / (n_pos + 2), lo = 1 / (n_neg + 2);
  std::vector<double> t(n);
  for (std::size_t i = 0; i < n; ++i) t[i] = y[i] == 1 ? hi : lo;

  double a = 0.0, b = std::log((n_neg + 1) / (n_pos + 1));
  auto objective = [&](double aa, double bb) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = aa * f[i] + bb;
      s += t[i] * z + log1p_exp(-z);
    }
    return s;
  };
  double fval = objective(a, b);
  for (int it = 0; it < 100; ++it) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0, g1 = 0, g2 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double z = a * f[i] + b;
      const double p = sigmoid(-z);  // model probability of class 1
      const double q = 1 - p;
      const double d2 = p * q;
      h11 += f[i] * f[i] * d2;
      h22 += d2;
      h21 += f[i] * d2;
      const double d1 = t[i] - p;
      g1 += f[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-10 && std::abs(g2) < 1e-10) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    double step = 1.0;
    bool improved = false;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * (g1 * da + g2 * db)) {
        a = na;
        b = nb;
        fval = nf;
        improved = true;
        break;
      }
      step *= 0.5;
    }
    if (!improved) break;
  }
  return {a, b};
}

}  // namespace

LinearSvm train_linear_svm(const TabularDataset& ds, const SvmParams& params) {
  require_binary_labels(ds);
  if (!(params.c > 0) || params.iterations < 1) throw ConfigError("train_linear_svm: invalid parameters");
  const std::size_t n = ds.size(), d = ds.width();
  const auto stdz = Standardizer::fit(ds.rows);
  const Matrix xs = standardise(ds.rows, stdz);
  const double lambda = 1.0 / (params.c * static_cast<double>(n));

  std::vector<double> w(d, 0.0), avg_w(d, 0.0), grad(d);
  double b = 0.0, avg_b = 0.0;
  for (int t = 1; t <= params.iterations; ++t) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      auto r = xs.row(i);
      const double yi = ds.labels[i] == 1 ? 1.0 : -1.0;
      double z = b;
      for (std::size_t j = 0; j < d; ++j) z += w[j] * r[j];
      if (yi * z < 1.0) {
        for (std::size_t j = 0; j < d; ++j) grad[j] -= yi * r[j];
        grad_b -= yi;
      }
    }
    const double eta = 1.0 / (lambda * t);
    for (std::size_t j = 0; j < d; ++j) {
      w[j] -= eta * (lambda * w[j] + grad[j] / static_cast<double>(n));
    }
    b -= eta * grad_b / static_cast<double>(n);
    // Project onto the ball of radius 1/sqrt(lambda) (Pegasos).
    double norm = 0.0;
    for (double v : w) norm += v * v;
    norm = std::sqrt(norm);
    const double radius = 1.0 / std::sqrt(lambda);
    if (norm > radius) {
      for (double& v : w) v *= radius / norm;
    }
    const double keep = static_cast<double>(t - 1) / t;
    for (std::size_t j = 0; j < d; ++j) avg_w[j] = keep * avg_w[j] + w[j] / t;
    avg_b = keep * avg_b + b / t;
  }

  std::vector<double> weights(d);
  double bias = avg_b;
  for (std::size_t j = 0; j < d; ++j) {
    weights[j] = avg_w[j] * stdz.scales[j];
    bias -= weights[j] * stdz.means[j];
  }
  LinearSvm raw(weights, bias, -1.0, 0.0);
  std::vector<double> margins(n);
  for (std::size_t i = 0; i < n; ++i) margins[i] = raw.margin(ds.rows.row(i));
  auto [a, pb] = platt_fit(margins, ds.labels);
  return LinearSvm(std::move(weights), bias, a, pb);
}

}  // namespace thermoscan
