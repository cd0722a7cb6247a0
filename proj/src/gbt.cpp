#include "thermoscan/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>

#include "thermoscan/rng.hpp"

namespace thermoscan {
namespace {

double soft_threshold(double g, double alpha) {
  if (g > alpha) return g - alpha;
  if (g < -alpha) return g + alpha;
  return 0.0;
}

struct Stats {
  double g = 0.0;
  double h = 0.0;
  std::size_t n = 0;
};

struct BoostContext {
  const Matrix& x;
  const std::vector<double>& grad;
  const std::vector<double>& hess;
  const GbtParams& p;
  std::vector<std::size_t> features;
};

double leaf_weight(const Stats& s, const GbtParams& p) {
  return -soft_threshold(s.g, p.alpha) / (s.h + p.lambda);
}

double structure_score(double g, double h, const GbtParams& p) {
  const double t = soft_threshold(g, p.alpha);
  return t * t / (h + p.lambda);
}

struct Candidate {
  int feature = -1;
  double threshold = 0.0;
  double loss_change = 0.0;
  Stats left, right;
};

/// Rows sorted by (g, h) so sums do not depend on the input row order.
Stats canonical_stats(const BoostContext& ctx, std::vector<std::size_t> rows) {
  std::sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    return ctx.grad[a] < ctx.grad[b] || (ctx.grad[a] == ctx.grad[b] && ctx.hess[a] < ctx.hess[b]);
  });
  Stats s;
  for (auto i : rows) {
    s.g += ctx.grad[i];
    s.h += ctx.hess[i];
  }
  s.n = rows.size();
  return s;
}

std::optional<Candidate> find_split(const BoostContext& ctx, const std::vector<std::size_t>& rows, const Stats& total) {
  const auto& p = ctx.p;
  const double parent = structure_score(total.g, total.h, p);
  std::optional<Candidate> best;
  std::vector<std::size_t> order = rows;
  for (auto f : ctx.features) {
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const double va = ctx.x(a, f), vb = ctx.x(b, f);
      if (va != vb) return va < vb;
      if (ctx.grad[a] != ctx.grad[b]) return ctx.grad[a] < ctx.grad[b];
      return ctx.hess[a] < ctx.hess[b];
    });
    Stats left;
    for (std::size_t k = 0; k + 1 < order.size(); ++k) {
      const auto i = order[k];
      left.g += ctx.grad[i];
      left.h += ctx.hess[i];
      ++left.n;
      const double v = ctx.x(i, f), next = ctx.x(order[k + 1], f);
      if (v == next) continue;
      Stats right{total.g - left.g, total.h - left.h, total.n - left.n};
      if (left.n < static_cast<std::size_t>(p.min_child_samples) ||
          right.n < static_cast<std::size_t>(p.min_child_samples)) {
        continue;
      }
      if (left.h < p.min_child_weight || right.h < p.min_child_weight) continue;
      const double change =
          0.5 * (structure_score(left.g, left.h, p) + structure_score(right.g, right.h, p) - parent);
      if (!(change > p.gamma)) continue;
      if (!best || change > best->loss_change + 1e-12) {
        double threshold = 0.5 * (v + next);
        if (!(threshold > v)) threshold = next;
        best = Candidate{static_cast<int>(f), threshold, change, left, right};
      }
    }
  }
  return best;
}

Tree grow_boosted_tree(const BoostContext& ctx, std::vector<std::size_t> rows) {
  const auto& p = ctx.p;
  const std::size_t leaf_cap = p.num_leaves > 0 ? static_cast<std::size_t>(p.num_leaves) : SIZE_MAX;

  struct Open {
    int node;
    int depth;
    std::vector<std::size_t> rows;
    Stats stats;
    std::optional<Candidate> split;
  };
  Tree tree;
  std::vector<Open> open;
  auto make_open = [&](int node, int depth, std::vector<std::size_t> r) {
    Open o{node, depth, std::move(r), {}, std::nullopt};
    o.stats = canonical_stats(ctx, o.rows);
    tree.nodes[static_cast<std::size_t>(node)].value = p.learning_rate * leaf_weight(o.stats, p);
    if (p.max_depth < 0 || depth < p.max_depth) o.split = find_split(ctx, o.rows, o.stats);
    return o;
  };
  tree.nodes.push_back(TreeNode{});
  open.push_back(make_open(0, 0, std::move(rows)));
  std::size_t leaves = 1;

  // Best-first growth: always split the open leaf with the largest loss change;
  // ties go to the earliest-created node. Without a leaf cap this equals
  // depth-wise growth, since each node's split depends only on its own rows.
  while (leaves < leaf_cap) {
    std::ptrdiff_t pick = -1;
    for (std::size_t k = 0; k < open.size(); ++k) {
      if (!open[k].split) continue;
      if (pick < 0 || open[k].split->loss_change > open[static_cast<std::size_t>(pick)].split->loss_change + 1e-12 ||
          (std::abs(open[k].split->loss_change - open[static_cast<std::size_t>(pick)].split->loss_change) <= 1e-12 &&
           open[k].node < open[static_cast<std::size_t>(pick)].node)) {
        pick = static_cast<std::ptrdiff_t>(k);
      }
    }
    if (pick < 0) break;
    Open cur = std::move(open[static_cast<std::size_t>(pick)]);
    open.erase(open.begin() + pick);
    const auto& s = *cur.split;

    std::vector<std::size_t> left, right;
    for (auto i : cur.rows) (ctx.x(i, static_cast<std::size_t>(s.feature)) < s.threshold ? left : right).push_back(i);
    const int left_id = static_cast<int>(tree.nodes.size());
    tree.nodes.push_back(TreeNode{});
    tree.nodes.push_back(TreeNode{});
    auto& node = tree.nodes[static_cast<std::size_t>(cur.node)];
    node.feature = s.feature;
    node.threshold = s.threshold;
    node.left = left_id;
    node.right = left_id + 1;
    open.push_back(make_open(left_id, cur.depth + 1, std::move(left)));
    open.push_back(make_open(left_id + 1, cur.depth + 1, std::move(right)));
    ++leaves;
  }
  return tree;
}

}  // namespace

void GbtParams::validate() const {
  auto in_unit = [](double v) { return v > 0.0 && v <= 1.0; };
  if (n_estimators < 0) throw ConfigError("gbt: n_estimators must be >= 0");
  if (!in_unit(learning_rate)) throw ConfigError("gbt: learning_rate must lie in (0,1]");
  if (!in_unit(subsample)) throw ConfigError("gbt: subsample must lie in (0,1]");
  if (!in_unit(colsample_bytree)) throw ConfigError("gbt: colsample_bytree must lie in (0,1]");
  if (max_depth == 0 || max_depth < -1) throw ConfigError("gbt: max_depth must be positive or -1");
  if (num_leaves < 0 || num_leaves == 1) throw ConfigError("gbt: num_leaves must be 0 or >= 2");
  if (lambda < 0 || alpha < 0 || gamma < 0 || min_child_weight < 0) {
    throw ConfigError("gbt: regularisation terms must be non-negative");
  }
  if (min_child_samples < 1) throw ConfigError("gbt: min_child_samples must be >= 1");
}

GbtParams gbt_x_defaults() { return GbtParams{}; }

GbtParams gbt_l_defaults() {
  GbtParams p;
  p.n_estimators = 100;
  p.learning_rate = 0.1;
  p.max_depth = -1;
  p.num_leaves = 31;
  p.lambda = 0.0;
  p.alpha = 0.0;
  p.min_child_samples = 20;
  p.min_child_weight = 1e-3;
  return p;
}

double GradientBoostedTrees::predict_raw(std::span<const double> x, std::size_t rounds) const {
  check_width(x);
  double z = base_score_;
  rounds = std::min(rounds, trees_.size());
  for (std::size_t t = 0; t < rounds; ++t) z += trees_[t].predict(x);
  return z;
}

double GradientBoostedTrees::predict_raw(std::span<const double> x) const { return predict_raw(x, trees_.size()); }

double GradientBoostedTrees::predict_score(std::span<const double> x) const { return sigmoid(predict_raw(x)); }

nlohmann::json GradientBoostedTrees::to_json() const {
  nlohmann::json trees = nlohmann::json::array();
  for (const auto& t : trees_) trees.push_back(t.to_json());
  return {{"width", width_}, {"base_score", base_score_}, {"trees", trees}};
}

GradientBoostedTrees train_gbt(const TabularDataset& ds, const GbtParams& params) {
  require_binary_labels(ds);
  params.validate();
  const std::size_t n = ds.size(), d = ds.width();
  if (n == 0) throw DataError("train_gbt: empty dataset");

  std::size_t positives = 0;
  for (int y : ds.labels) positives += y == 1 ? 1 : 0;
  const double rate = std::clamp(static_cast<double>(positives) / static_cast<double>(n), 1e-6, 1.0 - 1e-6);
  const double base = std::log(rate / (1.0 - rate));

  std::vector<double> raw(n, base), grad(n), hess(n);
  std::vector<Tree> trees;
  trees.reserve(static_cast<std::size_t>(params.n_estimators));

  const auto n_rows = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.subsample * static_cast<double>(n))));
  const auto n_cols = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(params.colsample_bytree * static_cast<double>(d))));

  for (int round = 0; round < params.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(raw[i]);
      grad[i] = p - ds.labels[i];
      hess[i] = std::max(p * (1.0 - p), 1e-16);
    }
    auto rng = make_rng(params.seed, {0x6B7u, static_cast<std::uint64_t>(round)});
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), 0);
    if (n_rows < n) {
      for (std::size_t i = 0; i < n_rows; ++i) std::swap(rows[i], rows[i + uniform_index(rng, n - i)]);
      rows.resize(n_rows);
      std::sort(rows.begin(), rows.end());
    }
    std::vector<std::size_t> cols(d);
    std::iota(cols.begin(), cols.end(), 0);
    if (n_cols < d) {
      for (std::size_t j = 0; j < n_cols; ++j) std::swap(cols[j], cols[j + uniform_index(rng, d - j)]);
      cols.resize(n_cols);
      std::sort(cols.begin(), cols.end());
    }

    BoostContext ctx{ds.rows, grad, hess, params, std::move(cols)};
    Tree tree = grow_boosted_tree(ctx, std::move(rows));
    for (std::size_t i = 0; i < n; ++i) raw[i] += tree.predict(ds.rows.row(i));
    trees.push_back(std::move(tree));
  }
  return GradientBoostedTrees(base, std::move(trees), d);
}

double gbt_training_loss(const GradientBoostedTrees& model, const TabularDataset& ds, std::size_t rounds) {
  double loss = 0.0;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const double z = model.predict_raw(ds.rows.row(i), rounds);
    const double softplus = z > 0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
    loss += softplus - (ds.labels[i] == 1 ? z : 0.0);
  }
  return loss / static_cast<double>(ds.size());
}

}  // namespace thermoscan
