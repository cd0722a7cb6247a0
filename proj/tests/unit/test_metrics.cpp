#include <cmath>
#include <limits>

#include "doctest.h"
#include "thermoscan/metrics.hpp"
#include "thermoscan/rng.hpp"

using namespace thermoscan;

namespace {

// Pairwise AUC oracle: fraction of (pos, neg) pairs ordered correctly.
double auc_oracle(const std::vector<double>& s, const std::vector<int>& y) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != 1) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] != 0) continue;
      pairs += 1;
      good += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  }
  return good / pairs;
}

}  // namespace

TEST_CASE("confusion_at boundary cases") {
  std::vector<double> s{0.9, 0.1};
  std::vector<int> y{1, 0};
  auto cm = confusion_at(s, y, 0.5);
  CHECK(cm.tp == 1);
  CHECK(cm.tn == 1);
  cm = confusion_at(s, y, 0.0);
  CHECK(cm.fn == 0);
  CHECK(cm.tn == 0);
  cm = confusion_at(s, y, 1.01);
  CHECK(cm.tp == 0);
  CHECK(cm.fp == 0);
  // threshold is inclusive
  CHECK(confusion_at(std::vector<double>{0.5}, std::vector<int>{1}, 0.5).tp == 1);
}

TEST_CASE("metric_set closed forms") {
  ConfusionMatrix cm{3, 0, 0, 1};
  CHECK(*metric_set(cm).recall == doctest::Approx(0.75));
  auto m = metric_set(ConfusionMatrix{0, 0, 5, 2});
  CHECK_FALSE(m.precision.has_value());
  CHECK(*m.recall == 0.0);
  CHECK(*m.f1 == 0.0);  // 2tp / (2tp + fp + fn) is still defined
  CHECK(*m.accuracy == doctest::Approx(5.0 / 7.0));
  CHECK(*m.npv == doctest::Approx(5.0 / 7.0));
}

TEST_CASE("f1 from precision 0.98 and recall 1.0") {
  // 49 tp, 1 fp, 0 fn
  auto m = metric_set(ConfusionMatrix{49, 1, 50, 0});
  CHECK(*m.precision == doctest::Approx(0.98));
  CHECK(*m.recall == 1.0);
  CHECK(*m.f1 == doctest::Approx(2 * 0.98 / 1.98).epsilon(1e-12));
  CHECK(std::round(*m.f1 * 100) / 100 == doctest::Approx(0.99));
}

TEST_CASE("roc_auc examples and oracle") {
  CHECK(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<int>{0, 0, 1, 1}) == 1.0);
  CHECK(roc_auc(std::vector<double>{0.4, 0.4, 0.4, 0.4}, std::vector<int>{0, 1, 0, 1}) == 0.5);
  CHECK(roc_auc(std::vector<double>{0.1, 0.35, 0.4, 0.8}, std::vector<int>{0, 1, 0, 1}) == 0.75);

  auto rng = make_rng(99);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t n = 2 + uniform_index(rng, 150);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(uniform01(rng) * 20) / 20;  // coarse grid forces ties
      y[i] = static_cast<int>(uniform_index(rng, 2));
    }
    y[0] = 0;
    y[1] = 1;
    REQUIRE(roc_auc(s, y) == auc_oracle(s, y));
    // strictly increasing transform leaves the rank statistic unchanged
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3 * s[i]) - 7;
    REQUIRE(roc_auc(t, y) == roc_auc(s, y));
  }
}

TEST_CASE("confusion counts are monotone in threshold") {
  auto rng = make_rng(4);
  std::vector<double> s(300);
  std::vector<int> y(300);
  for (std::size_t i = 0; i < s.size(); ++i) {
    s[i] = uniform01(rng);
    y[i] = static_cast<int>(uniform_index(rng, 2));
  }
  ConfusionMatrix prev = confusion_at(s, y, 0.0);
  for (double t = 0.01; t <= 1.0; t += 0.01) {
    auto cm = confusion_at(s, y, t);
    CHECK(cm.tp <= prev.tp);
    CHECK(cm.fp <= prev.fp);
    CHECK(cm.total() == 300);
    auto m = metric_set(cm);
    CHECK(*m.accuracy == static_cast<double>(cm.tp + cm.tn) / 300.0);
    if (m.precision && m.recall && m.f1) {
      CHECK(std::abs(*m.f1 - 2 * *m.precision * *m.recall / (*m.precision + *m.recall)) < 1e-12);
    }
    prev = cm;
  }
}

TEST_CASE("threshold_sweep") {
  SUBCASE("separated scores reach accuracy 1") {
    std::vector<double> s{0.1, 0.2, 0.3, 0.7, 0.8, 0.9};
    std::vector<int> y{0, 0, 0, 1, 1, 1};
    SweepOptions o;
    o.by = SelectBy::accuracy;
    auto r = threshold_sweep(s, y, o);
    CHECK(*r.best.accuracy == 1.0);
    CHECK(r.best_threshold > 0.3);
    CHECK(r.best_threshold <= 0.7);
    CHECK(*r.best.roc_auc == 1.0);
  }
  SUBCASE("scores equal to labels") {
    std::vector<double> s{0, 1, 0, 1};
    std::vector<int> y{0, 1, 0, 1};
    auto r = threshold_sweep(s, y);
    for (const auto& p : r.curve) {
      if (p.threshold > 0.0 && p.threshold <= 1.0) CHECK(*p.metrics.accuracy == 1.0);
    }
    CHECK(r.curve.size() == 101);
  }
  SUBCASE("selected threshold stays in the selection window") {
    auto rng = make_rng(8);
    std::vector<double> s(100);
    std::vector<int> y(100);
    for (std::size_t i = 0; i < 100; ++i) {
      y[i] = static_cast<int>(i % 2);
      s[i] = std::clamp(0.5 * uniform01(rng) + 0.3 * y[i], 0.0, 1.0);
    }
    auto r = threshold_sweep(s, y);
    CHECK(r.best_threshold >= 0.2 - 1e-12);
    CHECK(r.best_threshold <= 0.8 + 1e-12);
  }
}

TEST_CASE("select_by names round trip") {
  for (auto by : {SelectBy::accuracy, SelectBy::precision, SelectBy::recall, SelectBy::specificity, SelectBy::npv,
                  SelectBy::f1}) {
    CHECK(select_by_from_string(to_string(by)) == by);
  }
  CHECK_THROWS(select_by_from_string("auc2"));
}
