#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace thermoscan {

struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
  bool operator==(const ConfusionMatrix&) const = default;
};

/// Binary-classification metrics. A metric whose denominator is zero is left
/// empty instead of being reported as 0.
struct MetricSet {
  std::optional<double> accuracy;
  std::optional<double> precision;    // PPV
  std::optional<double> recall;       // TPR, sensitivity
  std::optional<double> specificity;  // TNR
  std::optional<double> npv;
  std::optional<double> f1;
  std::optional<double> roc_auc;

  bool operator==(const MetricSet&) const = default;
};

enum class SelectBy { accuracy, precision, recall, specificity, npv, f1 };

std::optional<double> metric_value(const MetricSet& m, SelectBy by);
std::string to_string(SelectBy by);
SelectBy select_by_from_string(const std::string& name);

/// Predicted positive iff score >= threshold. Labels must be 0/1.
ConfusionMatrix confusion_at(std::span<const double> scores, std::span<const int> labels,
                             double threshold);

MetricSet metric_set(const ConfusionMatrix& cm);

/// Mann-Whitney estimate of the ROC AUC; tied pairs count one half.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

struct SweepOptions {
  double lo = 0.0;
  double hi = 1.0;
  double step = 0.01;
  double select_lo = 0.2;
  double select_hi = 0.8;
  SelectBy by = SelectBy::f1;
};

struct CurvePoint {
  double threshold = 0.0;
  ConfusionMatrix cm;
  MetricSet metrics;
};

struct SweepResult {
  std::vector<CurvePoint> curve;
  double best_threshold = 0.5;
  /// Metrics at best_threshold, with roc_auc filled in when both classes exist.
  MetricSet best;
};

SweepResult threshold_sweep(std::span<const double> scores, std::span<const int> labels,
                            const SweepOptions& options = {});

/// Columns: threshold, accuracy, precision, recall, specificity, npv, f1.
/// Undefined metrics are written as empty fields.
void write_curve_csv(const std::filesystem::path& path, const std::vector<CurvePoint>& curve);

}  // namespace thermoscan
