#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "thermoscan/dataset.hpp"
#include "thermoscan/hpo.hpp"
#include "thermoscan/metrics.hpp"
#include "thermoscan/nn.hpp"
#include "thermoscan/registry.hpp"
#include "thermoscan/tabular.hpp"
#include "thermoscan/thermal.hpp"

namespace thermoscan {

/// All 16 combinations of {scale, augment, expand, polynomial}, counted as a
/// binary number with scale as the high bit: original first, everything last.
std::vector<TransformRecipe> tabular_grid(int augment_degree = 4, LeakageMode mode = LeakageMode::paper_faithful);

struct ThermalToggles {
  bool mask = false;
  bool augment = false;
  bool normalize = false;

  std::string label() const;
  bool operator==(const ThermalToggles&) const = default;
};

/// The 8 combinations of {mask, augment, normalize}, original first.
std::vector<ThermalToggles> thermal_grid();

struct ResultRow {
  std::string dataset;
  std::string mode;    // leakage mode, or "thermal"
  std::string recipe;  // cell label
  std::string model;
  MetricSet metrics;
  double threshold = 0.0;
  double duration_ms = 0.0;
  bool ok = true;
  std::string error;
};

struct TabularPlan {
  std::string dataset_id = "dataset";
  TabularDataset data;
  std::vector<TransformRecipe> recipes = tabular_grid();
  std::vector<LearnerSpec> roster = default_roster();
  double test_fraction = 0.3;
  std::uint64_t seed = 42;
  SweepOptions sweep;
  int jobs = 0;  // 0: OpenMP default
  /// When set, per-(cell, model) threshold curves are written here.
  std::optional<std::filesystem::path> curve_dir;
};

/// One shared stratified split per seed; each cell applies its recipe, trains
/// every roster model and sweeps the threshold on the test rows. Cells run in
/// parallel with per-cell derived seeds. Failures become rows with ok = false.
std::vector<ResultRow> run_doe(const TabularPlan& plan);

/// Header: dataset,mode,recipe,model,accuracy,precision,recall,specificity,npv,
/// f1,roc_auc,threshold,time_ms,status,error. Metrics use 6 decimals; undefined
/// metrics are empty.
void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows,
                       bool include_time = true);
std::vector<ResultRow> read_results_csv(const std::filesystem::path& path);

struct Phase2Row {
  std::string family;
  std::string phase;      // "phase1" (defaults) or "phase2" (tuned)
  double cv_score = 0.0;  // mean validation metric
  ResultRow test;
  nlohmann::json params;
  std::size_t trials = 0;
};

struct HpoPlan {
  std::string dataset_id = "dataset";
  TabularDataset data;
  TransformRecipe recipe;
  std::vector<std::string> families = {"gbt_x", "gbt_l"};
  int n_iters = 200;
  hpo::Algo algo = hpo::Algo::tpe;
  hpo::TpeConfig tpe;
  hpo::CvOptions cv;
  double test_fraction = 0.3;
  std::uint64_t seed = 42;
  SweepOptions sweep;
  /// JSON-lines trial logs go to <dir>/<family>_trials.jsonl.
  std::optional<std::filesystem::path> history_dir;
  /// Explicit log file; only valid with a single family. Overrides history_dir.
  std::optional<std::filesystem::path> history_file;
  bool resume = false;
  /// When set, tuned models are saved as <dir>/<family>.model.json.
  std::optional<std::filesystem::path> model_dir;
};

/// Per family: default-parameter row and tuned row (best CV trial retrained
/// on the whole engineered train set), both scored on the same test rows.
std::vector<Phase2Row> run_hpo_phase(const HpoPlan& plan);

void write_phase2_csv(const std::filesystem::path& path, const std::vector<Phase2Row>& rows, bool include_time = true);

struct ThermalPlan {
  std::vector<PatientRecord> records;
  std::vector<ThermalToggles> grid = thermal_grid();
  std::size_t height = 32, width = 32;
  double test_fraction = 0.3;
  int augment_degree = 2;
  NormalizeMode normalize = NormalizeMode::per_image();
  nn::TrainOptions train;
  double learning_rate = 3e-3;
  std::uint64_t seed = 42;
  SweepOptions sweep;
};

/// Images of `records` after the toggled steps, as flattened rows for the CNN.
struct ImageSet {
  Matrix rows;
  std::vector<int> labels;
  std::vector<std::string> patients;
};
ImageSet prepare_images(const std::vector<PatientRecord>& records, const ThermalToggles& toggles, std::size_t height,
                        std::size_t width, const NormalizeMode& normalize, int augment_degree, std::uint64_t seed);

/// Patient-level split, then per toggle set: prepare, train the standard CNN,
/// score every test image.
std::vector<ResultRow> run_thermal_doe(const ThermalPlan& plan);

/// Markdown summary of result CSVs: best row per cell, undefined metrics
/// shown as 0.00 with a footnote marker.
std::string summarize_results(const std::vector<ResultRow>& rows);

}  // namespace thermoscan
