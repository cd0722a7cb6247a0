#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/tree.hpp"

using namespace thermoscan;

namespace {

double gini(const std::vector<int>& y) {
  if (y.empty()) return 0;
  double p = std::count(y.begin(), y.end(), 1) / double(y.size());
  return 1 - p * p - (1 - p) * (1 - p);
}

struct OracleSplit {
  int feature = -1;
  double threshold = 0;
  double gain = -1;
};

// Enumerates every feature and every midpoint between distinct values.
OracleSplit brute_force(const TabularDataset& ds) {
  OracleSplit best;
  const double parent = gini(ds.labels);
  for (std::size_t f = 0; f < ds.width(); ++f) {
    std::set<double> vals;
    for (std::size_t i = 0; i < ds.size(); ++i) vals.insert(ds.rows(i, f));
    std::vector<double> v(vals.begin(), vals.end());
    for (std::size_t k = 0; k + 1 < v.size(); ++k) {
      const double t = 0.5 * (v[k] + v[k + 1]);
      std::vector<int> l, r;
      for (std::size_t i = 0; i < ds.size(); ++i) (ds.rows(i, f) < t ? l : r).push_back(ds.labels[i]);
      const double n = ds.size();
      const double g = parent - l.size() / n * gini(l) - r.size() / n * gini(r);
      if (g > best.gain + 1e-12) best = {int(f), t, g};
    }
  }
  return best;
}

}  // namespace

TEST_CASE("depth-1 tree on a step") {
  TabularDataset ds;
  ds.feature_names = {"x"};
  ds.label_names = {"a", "b"};
  for (int i = 1; i <= 4; ++i) ds.rows.append_row(std::vector<double>{double(i)});
  ds.labels = {0, 0, 1, 1};
  TreeParams p;
  p.max_depth = 1;
  auto t = train_tree(ds, p);
  REQUIRE(t.tree().nodes.size() == 3);
  const double thr = t.tree().nodes[0].threshold;
  CHECK(thr > 2.0);
  CHECK(thr <= 3.0);
  for (std::size_t i = 0; i < 4; ++i) CHECK(t.predict_score(ds.rows.row(i)) == double(ds.labels[i]));
}

TEST_CASE("best split matches the exhaustive oracle") {
  for (std::uint64_t seed = 0; seed < 60; ++seed) {
    auto rng = make_rng(seed, {0x7EE});
    const std::size_t n = 4 + uniform_index(rng, 9);  // 4..12
    TabularDataset ds;
    ds.feature_names = {"a", "b", "c"};
    ds.label_names = {"n", "p"};
    ds.rows = Matrix(n, 3);
    ds.labels.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < 3; ++j) ds.rows(i, j) = double(uniform_index(rng, 5));
      ds.labels[i] = int(uniform_index(rng, 2));
    }
    std::vector<std::size_t> idx(n), feats{0, 1, 2};
    std::iota(idx.begin(), idx.end(), 0);
    auto got = best_gini_split(ds.rows, ds.labels, idx, feats, 1);
    auto want = brute_force(ds);
    CAPTURE(seed);
    if (want.gain <= 1e-12) {
      CHECK((!got || got->gain <= 1e-12));
      continue;
    }
    REQUIRE(got.has_value());
    CHECK(got->feature == want.feature);
    CHECK(got->threshold == want.threshold);
    CHECK(got->gain == doctest::Approx(want.gain).epsilon(1e-12));
    CHECK(gini_gain(ds.rows, ds.labels, idx, got->feature, got->threshold) == doctest::Approx(want.gain));
  }
}

TEST_CASE("forest with one full tree reduces to a single tree") {
  auto ds = fixtures::xor_like(80, 3, 1);
  ForestParams fp;
  fp.n_trees = 1;
  fp.bootstrap = false;
  fp.colsample = 1.0;
  auto forest = train_forest(ds, fp);
  auto tree = train_tree(ds);
  auto rng = make_rng(2);
  for (int r = 0; r < 100; ++r) {
    std::vector<double> x{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
    CHECK(forest.predict_score(x) == tree.predict_score(x));
  }
}

TEST_CASE("tree and forest ignore training row order") {
  auto ds = fixtures::xor_like(70, 3, 4);
  std::vector<std::size_t> perm(ds.size());
  std::iota(perm.begin(), perm.end(), 0);
  auto rng = make_rng(9);
  shuffle(perm.begin(), perm.end(), rng);
  auto shuffled = ds.subset(perm);
  auto t1 = train_tree(ds), t2 = train_tree(shuffled);
  ForestParams fp;
  fp.n_trees = 15;
  fp.bootstrap = false;  // bootstrap draws by index, so only the no-resampling forest is order-free
  fp.colsample = 1.0;
  auto f1 = train_forest(ds, fp), f2 = train_forest(shuffled, fp);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(t1.predict_score(ds.rows.row(i)) == t2.predict_score(ds.rows.row(i)));
    CHECK(f1.predict_score(ds.rows.row(i)) == f2.predict_score(ds.rows.row(i)));
  }
}

TEST_CASE("tree limits and JSON") {
  auto ds = fixtures::xor_like(100, 3, 6);
  TreeParams p;
  p.max_depth = 3;
  p.min_samples_leaf = 5;
  auto t = train_tree(ds, p);
  CHECK(t.tree().depth() <= 3);
  auto back = Tree::from_json(t.tree().to_json());
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(back.predict(ds.rows.row(i)) == t.tree().predict(ds.rows.row(i)));
  auto full = train_tree(ds);
  int ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += (full.predict_score(ds.rows.row(i)) >= 0.5) == (ds.labels[i] == 1);
  CHECK(ok == int(ds.size()));
}

TEST_CASE("forest is reproducible per seed") {
  auto ds = fixtures::xor_like(60, 4, 7);
  ForestParams fp;
  fp.n_trees = 10;
  fp.seed = 3;
  auto a = train_forest(ds, fp), b = train_forest(ds, fp);
  CHECK(a.to_json() == b.to_json());
  fp.seed = 4;
  CHECK(train_forest(ds, fp).to_json() != a.to_json());
}
