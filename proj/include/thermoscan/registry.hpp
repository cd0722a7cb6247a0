#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "thermoscan/learners.hpp"

namespace thermoscan {

/// Learner families addressable from configs and search spaces:
/// linear, logistic, knn, svm, tree, forest, gbt_x, gbt_l, mlp.
const std::vector<std::string>& learner_families();

/// Trains `family` on `ds`. `params` overrides the family defaults; unknown
/// keys raise ConfigError. `seed` drives every random choice of the learner.
ClassifierPtr train_learner(const std::string& family, const TabularDataset& ds, const nlohmann::json& params,
                            std::uint64_t seed);

/// Roster entry: display name, family and parameter overrides.
struct LearnerSpec {
  std::string name;
  std::string family;
  nlohmann::json params = nlohmann::json::object();

  bool operator==(const LearnerSpec&) const = default;
};

/// One entry per family with default parameters.
std::vector<LearnerSpec> default_roster();

}  // namespace thermoscan
