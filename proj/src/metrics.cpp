#include "thermoscan/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "thermoscan/common.hpp"

namespace thermoscan {
namespace {

void check_binary(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    throw DataError("scores and labels differ in length (" + std::to_string(scores.size()) +
                    " vs " + std::to_string(labels.size()) + ")");
  }
  if (scores.empty()) throw DataError("empty score vector");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be binary (0/1)");
  }
}

std::optional<double> ratio(std::int64_t num, std::int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

std::optional<double> metric_value(const MetricSet& m, SelectBy by) {
  switch (by) {
    case SelectBy::accuracy: return m.accuracy;
    case SelectBy::precision: return m.precision;
    case SelectBy::recall: return m.recall;
    case SelectBy::specificity: return m.specificity;
    case SelectBy::npv: return m.npv;
    case SelectBy::f1: return m.f1;
  }
  return std::nullopt;
}

std::string to_string(SelectBy by) {
  switch (by) {
    case SelectBy::accuracy: return "accuracy";
    case SelectBy::precision: return "precision";
    case SelectBy::recall: return "recall";
    case SelectBy::specificity: return "specificity";
    case SelectBy::npv: return "npv";
    case SelectBy::f1: return "f1";
  }
  return "f1";
}

SelectBy select_by_from_string(const std::string& name) {
  for (auto by : {SelectBy::accuracy, SelectBy::precision, SelectBy::recall,
                  SelectBy::specificity, SelectBy::npv, SelectBy::f1}) {
    if (to_string(by) == name) return by;
  }
  throw ConfigError("unknown selection metric '" + name + "'");
}

ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> labels,
                             double threshold) {
  check_binary(scores, labels);
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      predicted ? ++cm.tp : ++cm.fn;
    } else {
      predicted ? ++cm.fp : ++cm.tn;
    }
  }
  return cm;
}

MetricSet metric_set(const ConfusionMatrix& cm) {
  MetricSet m;
  m.accuracy = ratio(cm.tp + cm.tn, cm.total());
  m.recall = ratio(cm.tp, cm.fn + cm.tp);
  m.specificity = ratio(cm.tn, cm.fp + cm.tn);
  m.precision = ratio(cm.tp, cm.tp + cm.fp);
  m.npv = ratio(cm.tn, cm.tn + cm.fn);
  m.f1 = ratio(2 * cm.tp, 2 * cm.tp + cm.fp + cm.fn);
  return m;
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  check_binary(scores, labels);
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Twice the positive rank sum, using mid-ranks for ties; stays integral.
  std::int64_t twice_rank_sum = 0;
  std::int64_t n_pos = 0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    // ranks i+1..j+1, mid-rank (i+j+2)/2
    const auto twice_mid = static_cast<std::int64_t>(i + j + 2);
    for (std::size_t k = i; k <= j; ++k) {
      if (labels[order[k]] == 1) {
        twice_rank_sum += twice_mid;
        ++n_pos;
      }
    }
    i = j + 1;
  }
  const std::int64_t n_neg = static_cast<std::int64_t>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("roc_auc requires both classes");
  // 2U = 2R - n_pos(n_pos+1), an integer count of half-credits.
  const std::int64_t twice_u = twice_rank_sum - n_pos * (n_pos + 1);
  return static_cast<double>(twice_u) / (2.0 * static_cast<double>(n_pos * n_neg));
}

SweepResult threshold_sweep(std::span<const double> scores, std::span<const int> labels,
                            const SweepOptions& options) {
  check_binary(scores, labels);
  if (!(options.step > 0.0)) throw ConfigError("threshold sweep step must be positive");
  if (options.hi < options.lo) throw ConfigError("threshold sweep requires lo <= hi");

  const auto count =
      static_cast<std::size_t>(std::floor((options.hi - options.lo) / options.step + 1e-9)) + 1;
  SweepResult result;
  result.curve.reserve(count);

  std::optional<double> best_value;
  std::optional<std::size_t> best_index;
  for (std::size_t i = 0; i < count; ++i) {
    CurvePoint p;
    p.threshold = options.lo + static_cast<double>(i) * options.step;
    p.cm = confusion_at(scores, labels, p.threshold);
    p.metrics = metric_set(p.cm);
    const bool selectable = p.threshold >= options.select_lo - 1e-12 &&
                            p.threshold <= options.select_hi + 1e-12;
    if (selectable) {
      auto v = metric_value(p.metrics, options.by);
      if (v && (!best_value || *v > *best_value)) {
        best_value = v;
        best_index = i;
      }
      if (!best_index) best_index = i;
    }
    result.curve.push_back(std::move(p));
  }
  if (!best_index) {
    // Empty selection window: fall back to the whole grid.
    for (std::size_t i = 0; i < result.curve.size(); ++i) {
      auto v = metric_value(result.curve[i].metrics, options.by);
      if (v && (!best_value || *v > *best_value)) {
        best_value = v;
        best_index = i;
      }
    }
    if (!best_index) best_index = 0;
  }
  result.best_threshold = result.curve[*best_index].threshold;
  result.best = result.curve[*best_index].metrics;

  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (has_pos && has_neg) result.best.roc_auc = roc_auc(scores, labels);
  return result;
}

void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "threshold,accuracy,precision,recall,specificity,npv,f1\n";
  char buf[32];
  auto field = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    std::snprintf(buf, sizeof buf, "%.6f", *v);
    return buf;
  };
  for (const auto& p : curve) {
    std::snprintf(buf, sizeof buf, "%.4f", p.threshold);
    out << buf << ',' << field(p.metrics.accuracy) << ',' << field(p.metrics.precision) << ','
        << field(p.metrics.recall) << ',' << field(p.metrics.specificity) << ','
        << field(p.metrics.npv) << ',' << field(p.metrics.f1) << '\n';
  }
}

}  // namespace thermoscan
