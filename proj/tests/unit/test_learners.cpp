#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/learners.hpp"
#include "thermoscan/registry.hpp"

using namespace thermoscan;

namespace {

double train_accuracy(const Classifier& m, const TabularDataset& ds) {
  int ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) ok += (m.predict_score(ds.rows.row(i)) >= 0.5) == (ds.labels[i] == 1);
  return double(ok) / ds.size();
}

}  // namespace

TEST_CASE("linear regression exact fit and limits") {
  Matrix x(5, 1);
  std::vector<double> y(5);
  for (int i = 0; i < 5; ++i) {
    x(i, 0) = i;
    y[i] = 2.0 * i;
  }
  auto lr = train_linear(x, y, 0.0);
  CHECK(std::abs(lr.weights()[0] - 2.0) < 1e-9);
  CHECK(std::abs(lr.bias()) < 1e-9);

  std::vector<double> same(5, 0.7);
  auto c = train_linear(x, same, 0.0);
  CHECK(std::abs(c.weights()[0]) < 1e-9);
  CHECK(c.bias() == doctest::Approx(0.7));

  auto big = train_linear(x, y, 1e12);
  CHECK(std::abs(big.weights()[0]) < 1e-6);
  CHECK(big.bias() == doctest::Approx(4.0).epsilon(1e-6));

  LinearRegression clamp({10.0}, 0.0);
  CHECK(clamp.predict_score(std::vector<double>{1.0}) == 1.0);
  CHECK(clamp.predict_score(std::vector<double>{-1.0}) == 0.0);
}

TEST_CASE("logistic regression") {
  LogisticRegression zero({0.0, 0.0}, 0.0);
  CHECK(zero.predict_score(std::vector<double>{3, -8}) == 0.5);

  auto ds = fixtures::blobs(80, 2, 6.0, 1);
  auto m = train_logistic(ds);
  CHECK(train_accuracy(m, ds) == 1.0);
  const auto& h = m.loss_history();
  for (std::size_t i = 1; i < h.size(); ++i) CHECK(h[i] <= h[i - 1] + 1e-15);

  // negating features, or flipping labels, negates the coefficients; doing both restores them
  auto mirrored = ds;
  for (auto& v : mirrored.rows.data()) v = -v;
  auto flipped = ds;
  for (auto& y : flipped.labels) y = 1 - y;
  auto both = mirrored;
  both.labels = flipped.labels;
  auto m2 = train_logistic(mirrored), m3 = train_logistic(flipped), m4 = train_logistic(both);
  for (std::size_t j = 0; j < 2; ++j) {
    CHECK(m2.weights()[j] == doctest::Approx(-m.weights()[j]).epsilon(1e-6));
    CHECK(m3.weights()[j] == doctest::Approx(-m.weights()[j]).epsilon(1e-6));
    CHECK(m4.weights()[j] == doctest::Approx(m.weights()[j]).epsilon(1e-6));
  }
}

TEST_CASE("kNN") {
  auto ds = fixtures::blobs(30, 3, 2.0, 2);
  auto k1 = train_knn(ds, 1);
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(k1.predict_score(ds.rows.row(i)) == double(ds.labels[i]));
  auto kn = train_knn(ds, static_cast<int>(ds.size()));
  const double prevalence = double(ds.class_counts()[1]) / ds.size();
  CHECK(kn.predict_score(std::vector<double>{100, 100, 100}) == doctest::Approx(prevalence));

  // equidistant neighbours: lower training index wins
  TabularDataset tie;
  tie.feature_names = {"x"};
  tie.label_names = {"a", "b"};
  tie.rows.append_row(std::vector<double>{-1});
  tie.rows.append_row(std::vector<double>{1});
  tie.labels = {1, 0};
  CHECK(train_knn(tie, 1).predict_score(std::vector<double>{0}) == 1.0);
  CHECK_THROWS(train_knn(ds, 0));
}

TEST_CASE("linear SVM separates blobs") {
  auto ds = fixtures::blobs(80, 2, 6.0, 3);
  auto m = train_linear_svm(ds);
  CHECK(train_accuracy(m, ds) >= 0.98);
  CHECK(m.platt_a() < 0);  // larger margin -> higher probability
}

TEST_CASE("every family scores in [0,1] and checks width") {
  auto ds = fixtures::xor_like(60, 4, 5);
  auto rng = make_rng(6);
  for (const auto& fam : learner_families()) {
    CAPTURE(fam);
    auto m = train_learner(fam, ds, nlohmann::json::object(), 1);
    for (int r = 0; r < 50; ++r) {
      std::vector<double> x(4);
      for (auto& v : x) v = 20 * standard_normal(rng);
      const double s = m->predict_score(x);
      CHECK(s >= 0.0);
      CHECK(s <= 1.0);
    }
    CHECK_THROWS_AS(m->predict_score(std::vector<double>{1.0}), DataError);
    auto batch = m->predict_scores(ds.rows);
    CHECK(batch.size() == ds.size());
    CHECK(batch[3] == m->predict_score(ds.rows.row(3)));
  }
}

TEST_CASE("non-binary labels are rejected") {
  auto ds = fixtures::blobs(9, 2, 1.0, 1);
  ds.labels[0] = 2;
  ds.label_names.push_back("third");
  CHECK_THROWS_AS(require_binary_labels(ds), DataError);
  CHECK_THROWS_AS(train_logistic(ds), DataError);
}

TEST_CASE("sigmoid is safe at extremes") {
  CHECK(sigmoid(0) == 0.5);
  CHECK(sigmoid(1000) == 1.0);
  CHECK(sigmoid(-1000) >= 0.0);
  CHECK(std::isfinite(sigmoid(-1000)));
}
