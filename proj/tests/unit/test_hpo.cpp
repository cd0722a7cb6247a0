#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/hpo.hpp"

using namespace thermoscan;
using namespace thermoscan::hpo;

namespace {

SearchSpace one_dim(double a, double b) { return {{Dimension::uniform("x", a, b)}}; }

double quadratic(const nlohmann::json& p) { return std::pow(p.at("x").get<double>() - 2.0, 2); }

}  // namespace

TEST_CASE("prior draws follow their laws") {
  SearchSpace s{{Dimension::uniform("u", 0, 1), Dimension::loguniform("l", 1e-4, 1e-1),
                 Dimension::quniform("q", 1, 10, 1), Dimension::choice("c", {"a", "b", 3})}};
  double sum = 0;
  std::vector<int> decades(3, 0);
  std::set<long> qs;
  for (std::size_t i = 0; i < 10000; ++i) {
    auto p = suggest_random(s, 5, i);
    REQUIRE(s.contains(p));
    sum += p["u"].get<double>();
    const double lg = std::log10(p["l"].get<double>());
    REQUIRE(lg >= -4.0);
    REQUIRE(lg <= -1.0);
    ++decades[std::min(2, int(lg + 4))];
    REQUIRE(p["q"].is_number_integer());
    qs.insert(p["q"].get<long>());
  }
  CHECK(sum / 10000 == doctest::Approx(0.5).epsilon(0.04));
  for (int d : decades) CHECK(std::abs(d - 3333) < 250);
  CHECK(*qs.begin() == 1);
  CHECK(*qs.rbegin() == 10);
  CHECK(qs.size() == 10);
  CHECK(suggest_random(s, 5, 17) == suggest_random(s, 5, 17));
}

TEST_CASE("space validation and JSON") {
  CHECK_THROWS_AS(SearchSpace{{Dimension::uniform("x", 1, 1)}}.validate(), ConfigError);
  CHECK_THROWS_AS(SearchSpace{{Dimension::loguniform("x", 0, 1)}}.validate(), ConfigError);
  CHECK_THROWS_AS((SearchSpace{{Dimension::uniform("x", 0, 1), Dimension::uniform("x", 0, 2)}}.validate()), ConfigError);
  auto g = gbt_x_space();
  CHECK(SearchSpace::from_json(g.to_json()).to_json() == g.to_json());
  CHECK(g.dims.size() == 8);
  CHECK(gbt_l_space().dims.size() == 7);
  CHECK_THROWS_AS(preset_space("knn"), ConfigError);
  CHECK_FALSE(one_dim(0, 1).contains({{"x", 2.0}}));
  CHECK_FALSE(one_dim(0, 1).contains({{"x", 0.5}, {"y", 1}}));
}

TEST_CASE("good set size and parzen bounds") {
  CHECK(tpe_good_count(1, 0.25) == 1);
  CHECK(tpe_good_count(4, 0.25) == 1);
  CHECK(tpe_good_count(5, 0.25) == 2);
  CHECK(tpe_good_count(100, 0.25) == 25);
  CHECK(tpe_good_count(101, 0.25) == 26);

  auto empty = Parzen::fit({}, -1, 3);
  CHECK(empty.log_pdf(0.5) == doctest::Approx(-std::log(4.0)));

  auto rng = make_rng(1);
  for (int rep = 0; rep < 50; ++rep) {
    const double lo = -5 * uniform01(rng), hi = lo + 0.1 + 10 * uniform01(rng);
    std::vector<double> pts;
    for (int i = 0; i < 1 + rep % 7; ++i) pts.push_back(lo + (hi - lo) * uniform01(rng));
    auto pz = Parzen::fit(pts, lo, hi);
    // density integrates to one on the interval (midpoint rule)
    double mass = 0;
    const int m = 20000;
    for (int i = 0; i < m; ++i) mass += std::exp(pz.log_pdf(lo + (i + 0.5) * (hi - lo) / m)) * (hi - lo) / m;
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-3));
    for (int i = 0; i < 50; ++i) {
      const double x = pz.sample(rng);
      REQUIRE(x >= lo);
      REQUIRE(x <= hi);
    }
  }
}

TEST_CASE("TPE candidates stay inside random spaces") {
  auto rng = make_rng(2);
  for (int rep = 0; rep < 20; ++rep) {
    SearchSpace s{{Dimension::uniform("u", -uniform01(rng), 1 + uniform01(rng)),
                   Dimension::loguniform("l", 1e-3, 1e-3 * (2 + 100 * uniform01(rng))),
                   Dimension::quniform("q", 2, 2 + 3 * (1 + uniform_index(rng, 5)), 3),
                   Dimension::choice("c", {1, 2, 3})}};
    TrialHistory h;
    for (std::size_t i = 0; i < 30; ++i) {
      Trial t;
      t.params = suggest_random(s, rep, i);
      t.loss = uniform01(rng);
      h.trials.push_back(t);
    }
    TpeConfig c;
    c.n_startup = 5;
    c.seed = rep;
    for (int k = 0; k < 10; ++k) {
      auto p = suggest_tpe(s, h, c);
      REQUIRE(s.contains(p));
      Trial t;
      t.params = p;
      t.loss = uniform01(rng);
      h.trials.push_back(t);
    }
  }
}

TEST_CASE("startup phase equals random search") {
  auto s = one_dim(-10, 10);
  TrialHistory h;
  TpeConfig c;
  c.seed = 7;
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(suggest_tpe(s, h, c) == suggest_random(s, 7, h.trials.size()));
    Trial t;
    t.params = suggest_random(s, 7, i);
    t.loss = quadratic(t.params);
    h.trials.push_back(t);
  }
}

TEST_CASE("optimize on a 1D quadratic") {
  OptimizeOptions o;
  o.n_iters = 200;
  o.seed = 3;
  auto h = optimize(quadratic, one_dim(-10, 10), o);
  REQUIRE(h.trials.size() == 200);
  CHECK(std::abs(h.best()->params["x"].get<double>() - 2.0) < 0.1);
  auto bsf = h.best_so_far();
  for (std::size_t i = 1; i < bsf.size(); ++i) CHECK(bsf[i] <= bsf[i - 1]);
  // replay determinism
  auto again = optimize(quadratic, one_dim(-10, 10), o);
  for (std::size_t i = 0; i < 200; ++i) CHECK(again.trials[i].params == h.trials[i].params);
}

TEST_CASE("optimize edge cases") {
  OptimizeOptions o;
  o.n_iters = 0;
  CHECK(optimize(quadratic, one_dim(0, 1), o).trials.empty());
  o.n_iters = 1;
  auto c = optimize([](const nlohmann::json&) { return 4.25; }, one_dim(0, 1), o);
  CHECK(c.best()->loss == 4.25);

  o.n_iters = 30;
  o.tpe.n_startup = 5;
  int calls = 0;
  auto flaky = [&](const nlohmann::json& p) {
    if (++calls % 3 == 0) throw std::runtime_error("boom");
    if (calls % 5 == 0) return std::nan("");
    return quadratic(p);
  };
  auto h = optimize(flaky, one_dim(-10, 10), o);
  CHECK(h.trials.size() == 30);
  CHECK(h.ok_count() == 30 - 10 - 4);  // every 3rd throws; 5, 10, 20, 25 return NaN
  for (const auto& t : h.trials)
    if (t.status == TrialStatus::failed) CHECK(!t.error.empty());
}

TEST_CASE("history log, resume and top_k") {
  const auto dir = fixtures::temp_dir("hpo_log");
  OptimizeOptions o;
  o.n_iters = 12;
  o.seed = 9;
  o.tpe.n_startup = 4;
  o.history_path = dir / "h.jsonl";
  auto full = optimize(quadratic, one_dim(-10, 10), o);

  // stop early, then resume to the same budget
  std::filesystem::remove(dir / "h.jsonl");
  o.n_iters = 5;
  optimize(quadratic, one_dim(-10, 10), o);
  CHECK(load_history(dir / "h.jsonl").trials.size() == 5);
  o.n_iters = 12;
  o.resume = true;
  auto resumed = optimize(quadratic, one_dim(-10, 10), o);
  REQUIRE(resumed.trials.size() == 12);
  for (std::size_t i = 0; i < 12; ++i) CHECK(resumed.trials[i].params == full.trials[i].params);
  CHECK(load_history(dir / "h.jsonl").trials.size() == 12);

  TrialHistory h;
  for (double l : {3.0, 1.0, 2.0}) {
    Trial t;
    t.params = {{"x", l}};
    t.loss = l;
    h.trials.push_back(t);
  }
  auto top = top_k(h, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].loss == 1.0);
  CHECK(top[1].loss == 2.0);
  CHECK(top_k(h, 10).size() == 3);
  h.trials.push_back(h.trials[1]);  // same params twice is still two log entries
  CHECK(top_k(h, 2)[1].loss == 1.0);
  CHECK_THROWS(top_k(TrialHistory{}, 1));

  Trial failed;
  failed.params = {{"x", 0.0}};
  failed.status = TrialStatus::failed;
  failed.error = "e";
  auto j = failed.to_json();
  CHECK(j["loss"].is_null());
  CHECK(Trial::from_json(j).status == TrialStatus::failed);
}

TEST_CASE("cv objective") {
  auto ds = fixtures::blobs(60, 3, 3.0, 4);
  CvOptions cv;
  cv.seed = 2;
  auto obj = cv_objective("logistic", ds, cv);
  const double l1 = obj(nlohmann::json::object());
  CHECK(l1 >= 0.0);
  CHECK(l1 < 0.1);
  CHECK(obj(nlohmann::json::object()) == l1);
  cv.folds = 0;
  CHECK(cv_objective("logistic", ds, cv)(nlohmann::json::object()) < 0.2);
  CHECK_THROWS(obj({{"bogus", 1}}));
  CHECK(algo_from_string(to_string(Algo::random)) == Algo::random);
}
