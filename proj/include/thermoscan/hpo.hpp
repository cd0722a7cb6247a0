#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "thermoscan/dataset.hpp"
#include "thermoscan/metrics.hpp"
#include "thermoscan/rng.hpp"

namespace thermoscan::hpo {

/// One search dimension. loguniform bounds are given in natural units.
struct Dimension {
  enum class Kind { uniform, loguniform, quniform, choice };

  std::string name;
  Kind kind = Kind::uniform;
  double a = 0.0;
  double b = 1.0;
  double q = 1.0;
  std::vector<nlohmann::json> choices;

  static Dimension uniform(std::string name, double a, double b);
  static Dimension loguniform(std::string name, double a, double b);
  static Dimension quniform(std::string name, double a, double b, double q);
  static Dimension choice(std::string name, std::vector<nlohmann::json> values);

  /// Bounds of the space TPE works in (log space for loguniform).
  double lo() const;
  double hi() const;
  /// Maps a working-space coordinate to the emitted parameter value.
  nlohmann::json emit(double x) const;
  /// Inverse of emit for continuous kinds.
  double working(const nlohmann::json& value) const;
  /// Index of `value` among the choices, or -1.
  int choice_index(const nlohmann::json& value) const;
};

struct SearchSpace {
  std::vector<Dimension> dims;

  void validate() const;
  /// True when `params` has exactly the space's names with in-range values.
  bool contains(const nlohmann::json& params) const;
  nlohmann::json to_json() const;
  static SearchSpace from_json(const nlohmann::json& j);
};

enum class TrialStatus { ok, failed };

struct Trial {
  nlohmann::json params;
  double loss = 0.0;  // meaningful only when status == ok
  TrialStatus status = TrialStatus::ok;
  double duration_ms = 0.0;
  std::string error;

  nlohmann::json to_json() const;
  static Trial from_json(const nlohmann::json& j);
};

struct TrialHistory {
  std::vector<Trial> trials;
  std::uint64_t seed = 0;

  std::size_t ok_count() const;
  /// Lowest-loss ok trial (earliest on ties).
  std::optional<Trial> best() const;
  /// Running minimum of ok losses, one entry per trial (NaN before the first ok one).
  std::vector<double> best_so_far() const;
};

nlohmann::json suggest_random(const SearchSpace& space, std::uint64_t seed, std::size_t index);

struct TpeConfig {
  double gamma = 0.25;
  int n_candidates = 24;
  int n_startup = 20;
  std::uint64_t seed = 0;
};

/// Number of ok trials placed in the "good" set: ceil(gamma * n_ok).
std::size_t tpe_good_count(std::size_t n_ok, double gamma);

/// Parzen density over one continuous dimension: equal-weight Gaussians
/// truncated to [lo, hi]. An empty set gives the uniform prior.
struct Parzen {
  std::vector<double> mus;
  std::vector<double> sigmas;
  double lo = 0.0;
  double hi = 1.0;

  static Parzen fit(std::vector<double> points, double lo, double hi);
  double log_pdf(double x) const;
  double sample(Rng& rng) const;
};

nlohmann::json suggest_tpe(const SearchSpace& space, const TrialHistory& history, const TpeConfig& config);

enum class Algo { random, tpe };
std::string to_string(Algo algo);
Algo algo_from_string(const std::string& name);

/// Loss for one configuration. Exceptions and non-finite results mark the
/// trial failed.
using Objective = std::function<double(const nlohmann::json& params)>;

struct OptimizeOptions {
  int n_iters = 50;
  Algo algo = Algo::tpe;
  std::uint64_t seed = 0;
  TpeConfig tpe;
  /// JSON-lines log appended after every trial.
  std::optional<std::filesystem::path> history_path;
  /// Continue the trials already stored in history_path.
  bool resume = false;
};

/// Runs the suggest -> evaluate -> record loop until n_iters trials exist.
/// tpe.seed is taken from `seed`.
TrialHistory optimize(const Objective& objective, const SearchSpace& space, const OptimizeOptions& options);

TrialHistory load_history(const std::filesystem::path& path);

/// The k lowest-loss ok trials, earlier trials first on ties.
std::vector<Trial> top_k(const TrialHistory& history, std::size_t k);

struct CvOptions {
  /// Stratified k-fold when >= 2; 0 selects a single stratified 20% holdout.
  int folds = 3;
  SelectBy metric = SelectBy::accuracy;
  double threshold = 0.5;
  std::uint64_t seed = 0;
};

/// 1 - mean validation metric for `family` trained with the suggested params
/// merged over `base_params`. Folds run in parallel. An undefined metric on a
/// fold counts as 0.
Objective cv_objective(const std::string& family, const TabularDataset& ds, const CvOptions& options,
                       nlohmann::json base_params = nlohmann::json::object());

/// Depth-wise booster space: learning rate, gamma, max depth, lambda, alpha,
/// num_leaves, colsample_bytree, n_estimators.
SearchSpace gbt_x_space();
/// Leaf-wise booster space: learning rate, alpha, lambda, n_estimators,
/// subsample, min_child_samples, num_leaves.
SearchSpace gbt_l_space();
/// Preset by family name (gbt_x, gbt_l); ConfigError otherwise.
SearchSpace preset_space(const std::string& family);

}  // namespace thermoscan::hpo
