#include "thermoscan/tabular.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "thermoscan/rng.hpp"

namespace thermoscan {

std::string to_string(LeakageMode mode) {
  return mode == LeakageMode::paper_faithful ? "paper_faithful" : "leak_free";
}

LeakageMode leakage_mode_from_string(const std::string& name) {
  if (name == "paper_faithful") return LeakageMode::paper_faithful;
  if (name == "leak_free") return LeakageMode::leak_free;
  throw ConfigError("unknown leakage_mode '" + name + "'");
}

void TransformRecipe::validate() const {
  if (augment && augment_degree < 2) throw ConfigError("augment degree must be >= 2");
  if (polynomial && polynomial_degree != 2) throw ConfigError("only degree-2 polynomial features are supported");
}

std::string TransformRecipe::label() const {
  std::vector<std::string> parts;
  if (scale) parts.emplace_back("scaled");
  if (expand) parts.emplace_back("expanded");
  if (augment) parts.emplace_back("augmented");
  if (polynomial) parts.emplace_back("polynomial");
  if (parts.empty()) return "original";
  std::string out = parts[0];
  for (std::size_t i = 1; i < parts.size(); ++i) out += "+" + parts[i];
  return out;
}

FittedScaler FittedScaler::fit(const TabularDataset& train) {
  if (train.size() == 0) throw DataError("cannot fit a scaler on an empty set");
  const std::size_t n = train.size(), d = train.width();
  FittedScaler s;
  s.means.assign(d, 0.0);
  s.stds.assign(d, 0.0);
  s.zero_variance.assign(d, false);
  for (std::size_t j = 0; j < d; ++j) {
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += train.rows(i, j);
    const double mean = sum / static_cast<double>(n);
    double ss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double dev = train.rows(i, j) - mean;
      ss += dev * dev;
    }
    s.means[j] = mean;
    s.stds[j] = std::sqrt(ss / static_cast<double>(n));
    // Relative floor: columns that are constant up to rounding count as constant.
    s.zero_variance[j] = s.stds[j] <= 1e-12 * std::max(1.0, std::abs(mean));
  }
  return s;
}

TabularDataset FittedScaler::transform(const TabularDataset& ds) const {
  if (ds.width() != means.size()) throw DataError("scaler: dimension mismatch");
  TabularDataset out = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.width(); ++j) {
      const double centred = ds.rows(i, j) - means[j];
      out.rows(i, j) = zero_variance[j] ? 0.0 : centred / stds[j];
    }
  }
  return out;
}

TabularDataset FittedScaler::inverse_transform(const TabularDataset& ds) const {
  if (ds.width() != means.size()) throw DataError("scaler: dimension mismatch");
  TabularDataset out = ds;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    for (std::size_t j = 0; j < ds.width(); ++j) {
      out.rows(i, j) = zero_variance[j] ? means[j] : ds.rows(i, j) * stds[j] + means[j];
    }
  }
  return out;
}

ScaledPair scale(const TabularDataset& train, const TabularDataset& test) {
  if (train.width() != test.width()) throw DataError("scale: train and test differ in width");
  ScaledPair out;
  out.scaler = FittedScaler::fit(train);
  out.train = out.scaler.transform(train);
  out.test = out.scaler.transform(test);
  return out;
}

TabularDataset augment(const TabularDataset& train, int degree, std::uint64_t seed,
                       AugmentReport* report) {
  if (degree < 2) throw ConfigError("augment degree must be >= 2");
  const std::size_t n = train.size(), d = train.width();
  const auto by_class = train.indices_by_class();
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (!by_class[c].empty() && by_class[c].size() < 2) {
      throw DataError("augment: class '" + train.label_names[c] + "' has fewer than 2 rows");
    }
  }

  // Donor product space per class: if it cannot hold `degree` times the
  // class's rows, uniqueness is unattainable.
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    if (by_class[c].empty()) continue;
    double capacity = 1.0;
    for (std::size_t j = 0; j < d && capacity < 1e18; ++j) {
      std::set<double> values;
      for (auto i : by_class[c]) values.insert(train.rows(i, j));
      capacity *= static_cast<double>(values.size());
    }
    const double needed = static_cast<double>(by_class[c].size()) * degree;
    if (capacity < needed) {
      throw DataError("augment: class '" + train.label_names[c] +
                      "' cannot produce unique rows (donor product space too small)");
    }
  }

  TabularDataset out = train;
  std::set<std::vector<double>> seen;
  for (std::size_t i = 0; i < n; ++i) {
    auto r = train.rows.row(i);
    seen.emplace(r.begin(), r.end());
  }

  AugmentReport rep;
  std::vector<double> candidate(d);
  for (int copy = 1; copy < degree; ++copy) {
    for (std::size_t i = 0; i < n; ++i) {
      ++rep.requested;
      const auto& donors = by_class[static_cast<std::size_t>(train.labels[i])];
      auto rng = make_rng(seed, {0xA06u, static_cast<std::uint64_t>(copy), i});
      bool unique = false;
      for (int attempt = 0; attempt <= 100 && !unique; ++attempt) {
        for (std::size_t j = 0; j < d; ++j) {
          candidate[j] = train.rows(donors[uniform_index(rng, donors.size())], j);
        }
        unique = seen.insert(candidate).second;
      }
      if (!unique) {
        ++rep.dropped;
        continue;
      }
      out.rows.append_row(candidate);
      out.labels.push_back(train.labels[i]);
    }
  }
  if (rep.dropped > 0) {
    spdlog::warn("augment: dropped {} of {} synthetic rows that stayed duplicates after 100 retries",
                 rep.dropped, rep.requested);
  }
  if (report) *report = rep;
  return out;
}

TabularDataset expand(const TabularDataset& ds) {
  const std::size_t d = ds.width();
  if (d < 2) throw DataError("expand needs at least 2 features");
  TabularDataset out;
  out.feature_names = ds.feature_names;
  for (const char* name : {"row_min", "row_max", "row_mean", "row_median", "row_std",
                           "row_skewness", "row_kurtosis"}) {
    out.feature_names.emplace_back(name);
  }
  out.label_names = ds.label_names;
  out.labels = ds.labels;
  out.rows = Matrix(ds.size(), d + 7);

  std::vector<double> sorted(d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto src = ds.rows.row(i);
    auto dst = out.rows.row(i);
    std::copy(src.begin(), src.end(), dst.begin());

    std::copy(src.begin(), src.end(), sorted.begin());
    std::sort(sorted.begin(), sorted.end());
    const double dn = static_cast<double>(d);
    const double mean = std::accumulate(src.begin(), src.end(), 0.0) / dn;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : src) {
      const double dev = v - mean;
      const double dev2 = dev * dev;
      m2 += dev2;
      m3 += dev2 * dev;
      m4 += dev2 * dev2;
    }
    m2 /= dn;
    m3 /= dn;
    m4 /= dn;
    const double median = d % 2 == 1 ? sorted[d / 2] : 0.5 * (sorted[d / 2 - 1] + sorted[d / 2]);
    const bool flat = m2 <= 1e-24 * std::max(1.0, mean * mean);

    dst[d + 0] = sorted.front();
    dst[d + 1] = sorted.back();
    dst[d + 2] = mean;
    dst[d + 3] = median;
    dst[d + 4] = std::sqrt(m2);
    dst[d + 5] = flat ? 0.0 : m3 / std::pow(m2, 1.5);
    dst[d + 6] = flat ? 0.0 : m4 / (m2 * m2) - 3.0;
  }
  return out;
}

TabularDataset polynomial(const TabularDataset& ds, int degree) {
  if (degree != 2) throw ConfigError("only degree-2 polynomial features are supported");
  const std::size_t d = ds.width();
  const std::size_t out_d = 2 * d + d * (d - 1) / 2;
  if (d > 4096) throw DataError("polynomial: too many input features");

  TabularDataset out;
  out.feature_names = ds.feature_names;
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      out.feature_names.push_back(ds.feature_names[a] + "*" + ds.feature_names[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    out.feature_names.push_back(ds.feature_names[a] + "*" + ds.feature_names[a]);
  }
  out.label_names = ds.label_names;
  out.labels = ds.labels;
  out.rows = Matrix(ds.size(), out_d);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto x = ds.rows.row(i);
    auto y = out.rows.row(i);
    std::size_t k = 0;
    for (std::size_t a = 0; a < d; ++a) y[k++] = x[a];
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a + 1; b < d; ++b) y[k++] = x[a] * x[b];
    }
    for (std::size_t a = 0; a < d; ++a) y[k++] = x[a] * x[a];
  }
  return out;
}

EngineeredPair apply_recipe(const TabularDataset& train, const TabularDataset& test,
                            const TransformRecipe& recipe, std::uint64_t seed) {
  recipe.validate();
  EngineeredPair out{train, test};
  if (recipe.expand) {
    out.train = expand(out.train);
    out.test = expand(out.test);
  }
  if (recipe.polynomial) {
    out.train = polynomial(out.train, recipe.polynomial_degree);
    out.test = polynomial(out.test, recipe.polynomial_degree);
  }
  if (recipe.augment) {
    if (recipe.leakage_mode == LeakageMode::paper_faithful) {
      const double fraction = static_cast<double>(out.test.size()) /
                              static_cast<double>(out.train.size() + out.test.size());
      auto pooled = augment(concat(out.train, out.test), recipe.augment_degree, seed);
      auto resplit = train_test_split(pooled, fraction, derive_seed(seed, {0x9001u}), true);
      out.train = std::move(resplit.train);
      out.test = std::move(resplit.test);
    } else {
      out.train = augment(out.train, recipe.augment_degree, seed);
    }
  }
  if (recipe.scale) {
    auto scaled = scale(out.train, out.test);
    out.train = std::move(scaled.train);
    out.test = std::move(scaled.test);
  }
  return out;
}

}  // namespace thermoscan
