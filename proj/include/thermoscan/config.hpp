#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "thermoscan/bioheat.hpp"
#include "thermoscan/metrics.hpp"
#include "thermoscan/registry.hpp"
#include "thermoscan/tabular.hpp"

namespace thermoscan {

enum class DatasetKind { blood, eit, thermal, synthetic };
std::string to_string(DatasetKind kind);

struct HpoConfig {
  int iters = 200;
  std::string algo = "tpe";
  std::vector<std::string> families = {"gbt_x", "gbt_l"};
  int folds = 3;
  std::string metric = "accuracy";
  double gamma = 0.25;
  int n_candidates = 24;
  int n_startup = 20;

  bool operator==(const HpoConfig&) const = default;
};

struct ThermalConfig {
  std::size_t height = 32;
  std::size_t width = 32;
  int epochs = 15;
  int batch_size = 16;
  double learning_rate = 3e-3;
  int augment_degree = 2;
  double normalize_lo = 0.0;  // fixed-range normalisation when lo < hi
  double normalize_hi = 0.0;

  bool operator==(const ThermalConfig&) const = default;
};

/// Everything a command needs. All fields are explicit after parsing, so the
/// echo written next to the results reproduces the run.
struct RunConfig {
  DatasetKind dataset = DatasetKind::blood;
  std::string csv;  // tabular source (resolved path)
  std::string label_column;
  std::string positive_label;
  std::vector<std::string> ignore_columns;
  int eit_labels = 2;
  bool drop_con_adi = false;
  std::string thermal_dir;

  std::uint64_t seed = 42;
  double test_fraction = 0.3;
  int augment_degree = 4;
  LeakageMode leakage_mode = LeakageMode::paper_faithful;
  bool both_modes = false;
  std::vector<TransformRecipe> recipes;  // default: the 16-cell grid
  TransformRecipe tabular_recipe;        // used by `engineer`
  std::vector<LearnerSpec> roster;
  SweepOptions sweep;
  HpoConfig hpo;
  TransformRecipe hpo_recipe;            // cell the HPO phase works on
  bioheat::SyntheticOptions synthetic;
  ThermalConfig thermal;
  int jobs = 0;  // 0: all logical cores
  std::string output_dir = "results";
  std::string run_id = "run";

  nlohmann::json to_json() const;
  std::filesystem::path run_dir() const { return std::filesystem::path(output_dir) / run_id; }
};

/// Builds a config from JSON, filling defaults and rejecting unknown keys.
/// Errors name the offending field path. `THERMOSCAN_DATA_DIR` resolves
/// relative or missing dataset paths when `check_paths` is set.
RunConfig config_from_json(const nlohmann::json& j, bool check_paths = true);
RunConfig parse_config(const std::filesystem::path& path, bool check_paths = true);
void write_config_echo(const std::filesystem::path& path, const RunConfig& config);

nlohmann::json recipe_to_json(const TransformRecipe& r);

}  // namespace thermoscan
