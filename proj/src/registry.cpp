#include "thermoscan/registry.hpp"

#include <cmath>
#include <set>

#include "thermoscan/gbt.hpp"
#include "thermoscan/nn.hpp"
#include "thermoscan/tree.hpp"

namespace thermoscan {

namespace {

/// Reads typed overrides and rejects keys nobody asked for.
class ParamReader {
 public:
  ParamReader(const std::string& family, const nlohmann::json& params) : family_(family), params_(params) {
    if (!params_.is_null() && !params_.is_object()) throw ConfigError(family + ": params must be an object");
  }

  template <class T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (params_.is_null() || !params_.contains(key)) return;
    const auto& v = params_.at(key);
    try {
      if constexpr (std::is_same_v<T, int>) {
        const double d = v.get<double>();
        if (std::round(d) != d) throw ConfigError(family_ + ": " + key + " must be an integer");
        out = static_cast<int>(d);
      } else {
        out = v.get<T>();
      }
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(family_ + ": parameter '" + key + "' has the wrong type");
    }
  }

  void finish() const {
    if (params_.is_null()) return;
    for (const auto& [key, _] : params_.items()) {
      if (!seen_.contains(key)) throw ConfigError(family_ + ": unknown parameter '" + key + "'");
    }
  }

 private:
  std::string family_;
  const nlohmann::json& params_;
  std::set<std::string> seen_;
};

GbtParams read_gbt(ParamReader& r, GbtParams p, std::uint64_t seed) {
  r.read("n_estimators", p.n_estimators);
  r.read("learning_rate", p.learning_rate);
  r.read("max_depth", p.max_depth);
  r.read("num_leaves", p.num_leaves);
  r.read("lambda", p.lambda);
  r.read("alpha", p.alpha);
  r.read("gamma", p.gamma);
  r.read("subsample", p.subsample);
  r.read("colsample_bytree", p.colsample_bytree);
  r.read("min_child_samples", p.min_child_samples);
  r.read("min_child_weight", p.min_child_weight);
  r.finish();
  p.seed = seed;
  return p;
}

}  // namespace

const std::vector<std::string>& learner_families() {
  static const std::vector<std::string> families = {"linear", "logistic", "knn",   "svm", "tree",
                                                    "forest", "gbt_x",    "gbt_l", "mlp"};
  return families;
}

ClassifierPtr train_learner(const std::string& family, const TabularDataset& ds, const nlohmann::json& params,
                            std::uint64_t seed) {
  ParamReader r(family, params);
  if (family == "linear") {
    double l2 = 0.0;
    r.read("l2", l2);
    r.finish();
    return std::make_unique<LinearRegression>(train_linear(ds, l2));
  }
  if (family == "logistic") {
    LogisticParams p;
    r.read("learning_rate", p.learning_rate);
    r.read("iterations", p.iterations);
    r.read("l2", p.l2);
    r.finish();
    return std::make_unique<LogisticRegression>(train_logistic(ds, p));
  }
  if (family == "knn") {
    int k = 5;
    r.read("k", k);
    r.finish();
    return std::make_unique<KNearestNeighbors>(train_knn(ds, k));
  }
  if (family == "svm") {
    SvmParams p;
    r.read("c", p.c);
    r.read("iterations", p.iterations);
    r.finish();
    return std::make_unique<LinearSvm>(train_linear_svm(ds, p));
  }
  if (family == "tree") {
    TreeParams p;
    r.read("max_depth", p.max_depth);
    r.read("min_samples_leaf", p.min_samples_leaf);
    r.read("min_gain", p.min_gain);
    r.finish();
    return std::make_unique<DecisionTree>(train_tree(ds, p));
  }
  if (family == "forest") {
    ForestParams p;
    r.read("n_trees", p.n_trees);
    r.read("max_depth", p.tree.max_depth);
    r.read("min_samples_leaf", p.tree.min_samples_leaf);
    r.read("min_gain", p.tree.min_gain);
    r.read("bootstrap", p.bootstrap);
    r.read("colsample", p.colsample);
    r.finish();
    p.seed = seed;
    return std::make_unique<RandomForest>(train_forest(ds, p));
  }
  if (family == "gbt_x") return std::make_unique<GradientBoostedTrees>(train_gbt(ds, read_gbt(r, gbt_x_defaults(), seed)));
  if (family == "gbt_l") return std::make_unique<GradientBoostedTrees>(train_gbt(ds, read_gbt(r, gbt_l_defaults(), seed)));
  if (family == "mlp") {
    std::vector<int> hidden = {32, 16};
    double dropout = 0.1, lr = 1e-2;
    nn::TrainOptions t;
    t.epochs = 60;
    t.batch_size = 16;
    r.read("hidden", hidden);
    r.read("dropout", dropout);
    r.read("learning_rate", lr);
    r.read("epochs", t.epochs);
    r.read("batch_size", t.batch_size);
    r.finish();
    require_binary_labels(ds);
    t.seed = seed;
    auto spec = nn::standard_mlp(ds.width(), hidden, dropout, lr);
    return std::make_unique<nn::NeuralNet>(nn::nn_train(spec, ds.rows, ds.labels, t, true));
  }
  throw ConfigError("unknown learner family '" + family + "'");
}

std::vector<LearnerSpec> default_roster() {
  std::vector<LearnerSpec> out;
  for (const auto& f : learner_families()) out.push_back({f, f, nlohmann::json::object()});
  return out;
}

}  // namespace thermoscan
