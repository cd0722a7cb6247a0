#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/nn.hpp"

using namespace thermoscan;
using namespace thermoscan::nn;

namespace {

Matrix random_inputs(std::size_t n, std::size_t width, std::uint64_t seed) {
  auto rng = make_rng(seed);
  Matrix m(n, width);
  for (auto& v : m.data()) v = standard_normal(rng);
  return m;
}

std::vector<int> alternating(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = int(i % 2);
  return y;
}

}  // namespace

TEST_CASE("gradient check per layer type") {
  const auto y = alternating(6);
  SUBCASE("dense with each activation") {
    for (auto act : {Activation::relu, Activation::elu, Activation::sigmoid, Activation::tanh, Activation::linear}) {
      NetworkSpec s;
      s.input = {5, 1, 1};
      s.layers = {LayerSpec::dense(4, act), LayerSpec::dense(1, Activation::sigmoid)};
      CAPTURE(to_string(act));
      CHECK(nn_gradient_check(s, random_inputs(6, 5, 1), y) < 1e-4);
    }
  }
  SUBCASE("conv + maxpool + dense") {
    NetworkSpec s;
    s.input = {2, 6, 6};
    s.layers = {LayerSpec::conv2d(3, 3, Activation::elu), LayerSpec::maxpool2d(), LayerSpec::conv2d(2, 3, Activation::relu),
                LayerSpec::flatten(), LayerSpec::dense(3, Activation::elu), LayerSpec::dense(1, Activation::sigmoid)};
    CHECK(nn_gradient_check(s, random_inputs(6, 72, 2), y) < 1e-4);
  }
  SUBCASE("batch norm in both positions, dropout disabled") {
    NetworkSpec s;
    s.input = {1, 4, 4};
    s.layers = {LayerSpec::conv2d(2, 3, Activation::linear), LayerSpec::batch_norm(), LayerSpec::global_average_pool(),
                LayerSpec::dense(3, Activation::relu), LayerSpec::batch_norm(), LayerSpec::dropout(0.5),
                LayerSpec::dense(1, Activation::sigmoid)};
    CHECK(nn_gradient_check(s, random_inputs(6, 16, 3), y) < 1e-4);
  }
  SUBCASE("standard CNN") {
    auto s = standard_cnn({1, 8, 8}, 2, 2, 4, 0.25);
    CHECK(nn_gradient_check(s, random_inputs(6, 64, 4), y) < 1e-4);
  }
}

TEST_CASE("spec validation") {
  NetworkSpec s;
  s.input = {3, 1, 1};
  s.layers = {LayerSpec::dense(2, Activation::relu)};
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s.layers.push_back(LayerSpec::dense(1, Activation::sigmoid));
  CHECK_NOTHROW(s.validate());
  NetworkSpec bad;
  bad.input = {1, 3, 3};
  bad.layers = {LayerSpec::conv2d(2, 4, Activation::relu), LayerSpec::flatten(), LayerSpec::dense(1, Activation::sigmoid)};
  CHECK_THROWS_AS(bad.validate(), ConfigError);  // even kernel
  auto cnn = standard_cnn({1, 16, 16});
  auto back = NetworkSpec::from_json(cnn.to_json());
  CHECK(back.to_json() == cnn.to_json());
}

TEST_CASE("training without dropout or batch norm is deterministic per seed") {
  auto ds = fixtures::blobs(64, 4, 2.0, 5);
  NetworkSpec s;
  s.input = {4, 1, 1};
  s.layers = {LayerSpec::dense(8, Activation::relu), LayerSpec::dense(1, Activation::sigmoid)};
  s.optimizer.learning_rate = 1e-2;
  TrainOptions o;
  o.epochs = 10;
  o.batch_size = 8;
  o.seed = 3;
  auto a = nn_train(s, ds.rows, ds.labels, o), b = nn_train(s, ds.rows, ds.labels, o);
  CHECK(a.predict_scores(ds.rows) == b.predict_scores(ds.rows));
  CHECK(a.loss_history().size() == 10);
  CHECK(a.loss_history().back() < a.loss_history().front());
  int ok = 0;
  auto scores = a.predict_scores(ds.rows);
  for (std::size_t i = 0; i < ds.size(); ++i) ok += (scores[i] >= 0.5) == (ds.labels[i] == 1);
  CHECK(ok >= 60);
}

TEST_CASE("standard MLP with standardised inputs learns blobs") {
  auto ds = fixtures::blobs(100, 3, 2.5, 8);
  for (auto& v : ds.rows.data()) v = 1000 * v + 5000;  // badly scaled on purpose
  TrainOptions o;
  o.epochs = 30;
  o.batch_size = 16;
  o.seed = 1;
  auto m = nn_train(standard_mlp(3), ds.rows, ds.labels, o, true);
  auto scores = m.predict_scores(ds.rows);
  int ok = 0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(scores[i] >= 0.0);
    CHECK(scores[i] <= 1.0);
    ok += (scores[i] >= 0.5) == (ds.labels[i] == 1);
  }
  CHECK(ok >= 90);
  CHECK(m.predict_score(ds.rows.row(7)) == doctest::Approx(scores[7]).epsilon(1e-12));
}

TEST_CASE("parameters are named and exposed") {
  Network net(standard_cnn({1, 8, 8}, 1, 2, 4), 1);
  auto params = net.parameters();
  REQUIRE(!params.empty());
  for (const auto& p : params) {
    CHECK(p.values->size() == p.grads->size());
    CHECK(p.name.rfind("layer", 0) == 0);
  }
  CHECK(net.state_buffers().size() == 2);  // one batch norm: mean and variance
}
