#include <cmath>
#include <numeric>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/gbt.hpp"

using namespace thermoscan;

TEST_CASE("zero rounds gives the base-rate score") {
  auto ds = fixtures::blobs(30, 2, 1.0, 1);
  ds.labels[0] = 1;  // 16 positives of 30
  GbtParams p;
  p.n_estimators = 0;
  auto m = train_gbt(ds, p);
  const double rate = 16.0 / 30.0;
  CHECK(m.predict_score(ds.rows.row(5)) == doctest::Approx(rate).epsilon(1e-12));
  CHECK(m.base_score() == doctest::Approx(std::log(rate / (1 - rate))).epsilon(1e-12));
}

TEST_CASE("a single stump separates separable data") {
  TabularDataset ds;
  ds.feature_names = {"x"};
  ds.label_names = {"a", "b"};
  for (int i = 0; i < 10; ++i) {
    ds.rows.append_row(std::vector<double>{double(i)});
    ds.labels.push_back(i >= 5);
  }
  GbtParams p;
  p.n_estimators = 1;
  p.max_depth = 1;
  p.learning_rate = 1.0;
  p.lambda = 0.0;
  p.min_child_weight = 0.0;
  auto m = train_gbt(ds, p);
  for (std::size_t i = 0; i < 10; ++i) CHECK((m.predict_score(ds.rows.row(i)) >= 0.5) == (ds.labels[i] == 1));
}

TEST_CASE("training loss is non-increasing in rounds") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto ds = fixtures::xor_like(120, 4, seed);
    for (double lr : {0.05, 0.3}) {
      GbtParams p = gbt_x_defaults();
      p.learning_rate = lr;
      p.n_estimators = 40;
      p.seed = seed;
      auto m = train_gbt(ds, p);
      double prev = gbt_training_loss(m, ds, 0);
      for (std::size_t r = 1; r <= m.trees().size(); ++r) {
        const double l = gbt_training_loss(m, ds, r);
        CHECK(l <= prev + 1e-12);
        prev = l;
      }
    }
  }
}

TEST_CASE("leaf values follow the regularised second-order formula") {
  // One round, depth 0 split impossible: a single leaf gets -G/(H + lambda) * lr.
  TabularDataset ds;
  ds.feature_names = {"x"};
  ds.label_names = {"a", "b"};
  for (int i = 0; i < 8; ++i) {
    ds.rows.append_row(std::vector<double>{1.0});
    ds.labels.push_back(i < 2);
  }
  GbtParams p;
  p.n_estimators = 1;
  p.learning_rate = 0.5;
  p.lambda = 2.0;
  auto m = train_gbt(ds, p);
  const double base = std::log(2.0 / 6.0);
  const double prob = 0.25;
  const double g = 8 * prob - 2;  // sum(p - y)
  const double h = 8 * prob * (1 - prob);
  CHECK(m.predict_raw(ds.rows.row(0)) == doctest::Approx(base - 0.5 * g / (h + 2.0)).epsilon(1e-12));

  p.alpha = 10.0;  // L1 swallows the whole gradient
  auto sparse = train_gbt(ds, p);
  CHECK(sparse.predict_raw(ds.rows.row(0)) == doctest::Approx(base));
}

TEST_CASE("GBT fits a nonlinear problem and is order invariant without sampling") {
  auto ds = fixtures::xor_like(200, 4, 11);
  auto m = train_gbt(ds, gbt_x_defaults());
  int ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += (m.predict_score(ds.rows.row(i)) >= 0.5) == (ds.labels[i] == 1);
  CHECK(ok >= 190);

  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.rbegin(), perm.rend(), 0);
  auto m2 = train_gbt(ds.subset(perm), gbt_x_defaults());
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(m.predict_score(ds.rows.row(i)) == m2.predict_score(ds.rows.row(i)));
}

TEST_CASE("leaf-wise defaults respect num_leaves") {
  auto ds = fixtures::xor_like(150, 4, 3);
  GbtParams p = gbt_l_defaults();
  p.num_leaves = 5;
  auto m = train_gbt(ds, p);
  for (const auto& t : m.trees()) CHECK(t.leaf_count() <= 5);
  GbtParams bad;
  bad.subsample = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
