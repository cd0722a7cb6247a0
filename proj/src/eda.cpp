#include "thermoscan/eda.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "thermoscan/kernels.hpp"

namespace thermoscan {

namespace {

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

}  // namespace

CorrelationMatrix pearson_matrix(const TabularDataset& ds, bool include_label) {
  if (ds.size() < 2) throw DataError("pearson_matrix: need at least two rows");
  const std::size_t d = ds.width() + (include_label ? 1 : 0);
  Matrix data(ds.size(), d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.width(); ++j) data(i, j) = ds.rows(i, j);
    if (include_label) data(i, d - 1) = ds.labels[i];
  }
  CorrelationMatrix c;
  c.names = ds.feature_names;
  if (include_label) c.names.push_back("label");
  c.r = kernels::pearson(data);
  for (std::size_t j = 0; j < d; ++j) c.constant.push_back(std::isnan(c.r(j, j)));
  return c;
}

std::vector<double> label_correlations(const TabularDataset& ds) {
  const auto c = pearson_matrix(ds, true);
  std::vector<double> out(ds.width());
  for (std::size_t j = 0; j < ds.width(); ++j) out[j] = c.r(j, ds.width());
  return out;
}

Projection2D pca_2d(const TabularDataset& ds) {
  const std::size_t n = ds.size(), d = ds.width();
  if (n <= 2) throw DataError("pca_2d: need more than two rows");
  Projection2D p;
  p.means.assign(d, 0.0);
  p.scales.assign(d, 0.0);
  Matrix z(n, d);
  for (std::size_t j = 0; j < d; ++j) {
    double m = 0.0;
    for (std::size_t i = 0; i < n; ++i) m += ds.rows(i, j);
    m /= static_cast<double>(n);
    double v = 0.0;
    for (std::size_t i = 0; i < n; ++i) v += (ds.rows(i, j) - m) * (ds.rows(i, j) - m);
    const double s = std::sqrt(v / static_cast<double>(n));
    p.means[j] = m;
    p.scales[j] = s;
    for (std::size_t i = 0; i < n; ++i) z(i, j) = s > 0 ? (ds.rows(i, j) - m) / s : 0.0;
  }
  // Covariance of standardised columns (population normalisation).
  Matrix cov(d, d);
  for (std::size_t a = 0; a < d; ++a)
    for (std::size_t b = a; b < d; ++b) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += z(i, a) * z(i, b);
      cov(a, b) = cov(b, a) = s / static_cast<double>(n);
    }
  double total = 0.0;
  for (std::size_t j = 0; j < d; ++j) total += cov(j, j);

  p.components = Matrix(2, d);
  const std::size_t want = std::min<std::size_t>(2, d);
  for (std::size_t comp = 0; comp < want; ++comp) {
    // Deterministic start with a component along every axis.
    std::vector<double> v(d);
    for (std::size_t j = 0; j < d; ++j) v[j] = 1.0 + 0.1 * static_cast<double>(j);
    double lambda = 0.0;
    for (int it = 0; it < 100000; ++it) {
      std::vector<double> w(d, 0.0);
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) w[a] += cov(a, b) * v[b];
      double norm = 0.0;
      for (double x : w) norm += x * x;
      norm = std::sqrt(norm);
      if (norm < 1e-300) {
        lambda = 0.0;
        break;
      }
      double diff = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        w[j] /= norm;
        diff = std::max(diff, std::abs(w[j] - v[j]));
      }
      v = std::move(w);
      lambda = norm;
      if (diff < 1e-10) break;
    }
    std::size_t arg = 0;
    for (std::size_t j = 1; j < d; ++j) {
      if (std::abs(v[j]) > std::abs(v[arg])) arg = j;
    }
    if (v[arg] < 0)
      for (auto& x : v) x = -x;
    for (std::size_t j = 0; j < d; ++j) p.components(comp, j) = v[j];
    p.explained_variance.push_back(lambda);
    // Deflate.
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b) cov(a, b) -= lambda * v[a] * v[b];
  }
  while (p.explained_variance.size() < 2) p.explained_variance.push_back(0.0);
  for (double ev : p.explained_variance) p.explained_ratio.push_back(total > 0 ? ev / total : 0.0);
  p.rank_deficient = p.explained_variance[1] <= 1e-9 * std::max(total, 1e-300);
  if (p.rank_deficient) {
    for (std::size_t j = 0; j < d; ++j) p.components(1, j) = 0.0;
  }

  p.coords = Matrix(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 2; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += z(i, j) * p.components(c, j);
      p.coords(i, c) = s;
    }
  return p;
}

double pca_reconstruction_error(const TabularDataset& ds, const Projection2D& p, int components) {
  if (components < 0 || components > 2) throw ConfigError("pca_reconstruction_error: components must be 0..2");
  const std::size_t n = ds.size(), d = ds.width();
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> z(d), rec(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) z[j] = p.scales[j] > 0 ? (ds.rows(i, j) - p.means[j]) / p.scales[j] : 0.0;
    for (int c = 0; c < components; ++c) {
      double s = 0.0;
      for (std::size_t j = 0; j < d; ++j) s += z[j] * p.components(static_cast<std::size_t>(c), j);
      for (std::size_t j = 0; j < d; ++j) rec[j] += s * p.components(static_cast<std::size_t>(c), j);
    }
    for (std::size_t j = 0; j < d; ++j) err += (z[j] - rec[j]) * (z[j] - rec[j]);
  }
  return err / static_cast<double>(n * d);
}

void write_correlation_csv(const std::filesystem::path& path, const CorrelationMatrix& c) {
  auto f = open_out(path);
  f << "feature";
  for (const auto& n : c.names) f << ',' << n;
  f << '\n';
  for (std::size_t i = 0; i < c.names.size(); ++i) {
    f << c.names[i];
    for (std::size_t j = 0; j < c.names.size(); ++j) f << ',' << fmt(c.r(i, j));
    f << '\n';
  }
}

void write_projection_csv(const std::filesystem::path& path, const Projection2D& p, const TabularDataset& ds) {
  auto f = open_out(path);
  f << "pc1,pc2,label\n";
  for (std::size_t i = 0; i < p.coords.rows(); ++i) {
    f << fmt(p.coords(i, 0)) << ',' << fmt(p.coords(i, 1)) << ',' << ds.label_names.at(static_cast<std::size_t>(ds.labels[i]))
      << '\n';
  }
}

void write_pair_grid_csv(const std::filesystem::path& path, const TabularDataset& ds) {
  const auto c = pearson_matrix(ds, false);
  auto f = open_out(path);
  f << "i,j,feature_i,feature_j,r\n";
  for (std::size_t i = 0; i < ds.width(); ++i)
    for (std::size_t j = 0; j < ds.width(); ++j)
      f << i << ',' << j << ',' << ds.feature_names[i] << ',' << ds.feature_names[j] << ',' << fmt(c.r(i, j)) << '\n';
}

}  // namespace thermoscan
