#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/tabular.hpp"

using namespace thermoscan;

namespace {

TabularDataset one_column(std::vector<double> v) {
  TabularDataset ds;
  ds.feature_names = {"x"};
  ds.label_names = {"a", "b"};
  for (std::size_t i = 0; i < v.size(); ++i) {
    ds.rows.append_row(std::vector<double>{v[i]});
    ds.labels.push_back(static_cast<int>(i % 2));
  }
  return ds;
}

TabularDataset one_row(std::vector<double> v) {
  TabularDataset ds;
  for (std::size_t j = 0; j < v.size(); ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.label_names = {"a"};
  ds.rows.append_row(v);
  ds.labels.push_back(0);
  return ds;
}

}  // namespace

TEST_CASE("scale uses train statistics with population std") {
  auto tr = one_column({1, 2, 3});
  auto te = one_column({4});
  auto s = scale(tr, te);
  const double sd = std::sqrt(2.0 / 3.0);
  CHECK(s.train.rows(0, 0) == doctest::Approx((1 - 2) / sd).epsilon(1e-14));
  CHECK(s.train.rows(1, 0) == 0.0);
  CHECK(s.test.rows(0, 0) == doctest::Approx(2 / sd).epsilon(1e-14));

  auto c = scale(one_column({5, 5, 5}), one_column({6}));
  CHECK(c.scaler.zero_variance[0]);
  for (std::size_t i = 0; i < 3; ++i) CHECK(c.train.rows(i, 0) == 0.0);
}

TEST_CASE("scaled columns are standardised and invertible") {
  auto ds = fixtures::blobs(60, 5, 2.0, 4);
  auto s = scale(ds, ds);
  for (std::size_t j = 0; j < 5; ++j) {
    auto col = s.train.rows.column(j);
    double m = std::accumulate(col.begin(), col.end(), 0.0) / col.size();
    double v = 0;
    for (double x : col) v += (x - m) * (x - m);
    CHECK(std::abs(m) < 1e-9);
    CHECK(std::abs(std::sqrt(v / col.size()) - 1.0) < 1e-9);
  }
  auto back = s.scaler.inverse_transform(s.train);
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t j = 0; j < 5; ++j) CHECK(std::abs(back.rows(i, j) - ds.rows(i, j)) < 1e-12);
}

TEST_CASE("expand appends seven row statistics") {
  auto e = expand(one_row({1, 2, 3, 4, 5, 6, 7, 8, 9}));
  REQUIRE(e.width() == 16);
  auto r = e.rows.row(0);
  CHECK(r[9] == 1);   // min
  CHECK(r[10] == 9);  // max
  CHECK(r[11] == doctest::Approx(5));
  CHECK(r[12] == doctest::Approx(5));  // median
  CHECK(r[13] == doctest::Approx(std::sqrt(60.0 / 9.0)).epsilon(1e-12));
  CHECK(std::abs(r[14]) < 1e-12);  // skew
  // excess kurtosis of a discrete uniform 1..9: m4/m2^2 - 3
  double m2 = 0, m4 = 0;
  for (int k = 1; k <= 9; ++k) {
    m2 += std::pow(k - 5.0, 2) / 9;
    m4 += std::pow(k - 5.0, 4) / 9;
  }
  CHECK(r[15] == doctest::Approx(m4 / (m2 * m2) - 3).epsilon(1e-12));

  auto flat = expand(one_row({2, 2, 2}));
  CHECK(flat.rows(0, 7) == 0);
  CHECK(flat.rows(0, 8) == 0);
  CHECK(flat.rows(0, 9) == 0);
}

TEST_CASE("polynomial enumeration") {
  auto p = polynomial(one_row({2, 3}));
  CHECK(p.rows.data() == std::vector<double>{2, 3, 6, 4, 9});
  auto z = polynomial(one_row(std::vector<double>(4, 0.0)));
  for (double v : z.rows.data()) CHECK(v == 0.0);
  for (std::size_t d = 1; d <= 20; ++d) {
    std::vector<double> row(d);
    for (std::size_t j = 0; j < d; ++j) row[j] = double(j + 1);
    auto out = polynomial(one_row(row));
    // enumeration oracle: originals, i<j products, squares
    std::vector<double> want = row;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) want.push_back(row[i] * row[j]);
    for (std::size_t i = 0; i < d; ++i) want.push_back(row[i] * row[i]);
    REQUIRE(out.width() == 2 * d + d * (d - 1) / 2);
    CHECK(out.rows.data() == want);
  }
  CHECK(polynomial(one_row(std::vector<double>(9, 1.0))).width() == 54);
}

TEST_CASE("augment grows by the degree with unique rows from class marginals") {
  auto ds = fixtures::blobs(20, 3, 1.0, 9);
  AugmentReport rep;
  auto a = augment(ds, 4, 17, &rep);
  CHECK(a.size() == 80);
  CHECK(rep.dropped == 0);
  for (std::size_t i = 0; i < 20; ++i) CHECK(std::equal(a.rows.row(i).begin(), a.rows.row(i).end(), ds.rows.row(i).begin()));
  std::set<std::vector<double>> rows;
  for (std::size_t i = 0; i < a.size(); ++i) rows.insert(std::vector<double>(a.rows.row(i).begin(), a.rows.row(i).end()));
  CHECK(rows.size() == a.size());
  for (std::size_t i = 20; i < a.size(); ++i) {
    for (std::size_t j = 0; j < 3; ++j) {
      bool found = false;
      for (std::size_t o = 0; o < 20; ++o) found |= ds.labels[o] == a.labels[i] && ds.rows(o, j) == a.rows(i, j);
      CHECK(found);
    }
  }
  CHECK(augment(ds, 4, 17).rows == a.rows);
}

TEST_CASE("augment donor product on a tiny class") {
  TabularDataset ds;
  ds.feature_names = {"x", "y"};
  ds.label_names = {"a"};
  ds.rows.append_row(std::vector<double>{1, 2});
  ds.rows.append_row(std::vector<double>{3, 4});
  ds.labels = {0, 0};
  auto a = augment(ds, 2, 3);
  CHECK(a.size() == 4);
  std::set<std::pair<double, double>> allowed{{1, 4}, {3, 2}};
  for (std::size_t i = 2; i < a.size(); ++i) CHECK(allowed.count({a.rows(i, 0), a.rows(i, 1)}) == 1);

  // The donor product has four rows in total; degree 4 needs eight.
  CHECK_THROWS_AS(augment(ds, 4, 3), DataError);
}

TEST_CASE("row-local transforms commute with row permutation") {
  auto ds = fixtures::blobs(15, 4, 1.0, 1);
  std::vector<std::size_t> perm(15);
  std::iota(perm.begin(), perm.end(), 0);
  std::reverse(perm.begin(), perm.end());
  CHECK(expand(ds.subset(perm)) == expand(ds).subset(perm));
  CHECK(polynomial(ds.subset(perm)) == polynomial(ds).subset(perm));
}

TEST_CASE("recipes") {
  auto ds = fixtures::blobs(40, 9, 1.0, 5);
  auto s = train_test_split(ds, 0.3, 1);
  TransformRecipe none;
  auto id = apply_recipe(s.train, s.test, none, 3);
  CHECK(id.train == s.train);
  CHECK(id.test == s.test);
  CHECK(none.label() == "original");

  TransformRecipe ea;
  ea.expand = true;
  ea.augment = true;
  ea.augment_degree = 4;
  auto out = apply_recipe(s.train, s.test, ea, 3);
  CHECK(out.train.width() == 16);
  CHECK(out.train.size() == 4 * s.train.size());
  CHECK(out.test == expand(s.test));

  ea.leakage_mode = LeakageMode::paper_faithful;
  auto pf = apply_recipe(s.train, s.test, ea, 3);
  CHECK(pf.train.size() + pf.test.size() == 4 * ds.size());

  TransformRecipe sc;
  sc.scale = true;
  CHECK(apply_recipe(s.train, s.test, sc, 1).train == apply_recipe(s.train, s.test, sc, 1).train);

  TransformRecipe bad;
  bad.augment = true;
  bad.augment_degree = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  CHECK(leakage_mode_from_string(to_string(LeakageMode::leak_free)) == LeakageMode::leak_free);
}
