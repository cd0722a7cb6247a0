#pragma once

#include <cmath>
#include <filesystem>
#include <string>

#include "thermoscan/dataset.hpp"
#include "thermoscan/rng.hpp"

namespace fixtures {

using thermoscan::Matrix;
using thermoscan::TabularDataset;

/// Two Gaussian classes whose means differ by `sep` along every axis.
inline TabularDataset blobs(std::size_t n, std::size_t d, double sep, std::uint64_t seed) {
  auto rng = thermoscan::make_rng(seed, {0xB10B});
  TabularDataset ds;
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.label_names = {"neg", "pos"};
  ds.rows = Matrix(n, d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = static_cast<int>(i % 2);
    ds.labels[i] = y;
    for (std::size_t j = 0; j < d; ++j) ds.rows(i, j) = thermoscan::standard_normal(rng) + (y ? sep : 0.0);
  }
  return ds;
}

/// Nonlinear two-class problem: label = [x0 * x1 + 0.5 sin(3 x2) > 0], with
/// extra noise features. Trees separate it; a linear model does not.
inline TabularDataset xor_like(std::size_t n, std::size_t d, std::uint64_t seed) {
  auto rng = thermoscan::make_rng(seed, {0x40B});
  TabularDataset ds;
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.label_names = {"neg", "pos"};
  ds.rows = Matrix(n, d);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) ds.rows(i, j) = 2.0 * thermoscan::uniform01(rng) - 1.0;
    const double s = ds.rows(i, 0) * ds.rows(i, 1) + 0.5 * std::sin(3.0 * ds.rows(i, 2 % d));
    ds.labels[i] = s > 0 ? 1 : 0;
  }
  return ds;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("thermoscan_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace fixtures
