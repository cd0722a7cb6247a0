#include "thermoscan/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>

#include "thermoscan/doe.hpp"

namespace thermoscan {

namespace fs = std::filesystem;

std::string to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::blood: return "blood";
    case DatasetKind::eit: return "eit";
    case DatasetKind::thermal: return "thermal";
    case DatasetKind::synthetic: return "synthetic";
  }
  return "blood";
}

namespace {

/// Typed access to one JSON object with unknown-key detection.
class Section {
 public:
  Section(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  std::string where(const std::string& key = "") const {
    if (key.empty()) return path_.empty() ? "config" : path_;
    return path_.empty() ? key : path_ + "." + key;
  }

  bool has(const std::string& key) {
    known_.insert(key);
    return j_.contains(key);
  }

  const nlohmann::json& raw(const std::string& key) {
    known_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
      throw ConfigError(where(key) + " has the wrong type");
    }
  }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!known_.contains(key)) throw ConfigError("unknown key '" + where(key) + "'");
    }
  }

 private:
  const nlohmann::json& j_;
  std::string path_;
  std::set<std::string> known_;
};

TransformRecipe recipe_from_json(const nlohmann::json& j, const std::string& path, const TransformRecipe& base) {
  Section s(j, path);
  TransformRecipe r = base;
  s.get("scale", r.scale);
  s.get("augment", r.augment);
  s.get("augment_degree", r.augment_degree);
  s.get("expand", r.expand);
  s.get("polynomial", r.polynomial);
  s.get("polynomial_degree", r.polynomial_degree);
  if (s.has("leakage_mode")) {
    try {
      r.leakage_mode = leakage_mode_from_string(s.raw("leakage_mode").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(s.where("leakage_mode") + ": " + e.what());
    }
  }
  s.finish();
  try {
    r.validate();
  } catch (const std::exception& e) {
    throw ConfigError(s.where() + ": " + e.what());
  }
  return r;
}

std::string resolve_path(const std::string& p, const std::string& field, bool check) {
  if (!check) return p;
  if (fs::exists(p)) return p;
  if (const char* root = std::getenv("THERMOSCAN_DATA_DIR"); root && *root) {
    const auto alt = fs::path(root) / p;
    if (fs::exists(alt)) return alt.string();
  }
  throw ConfigError(field + ": path '" + p + "' does not exist");
}

}  // namespace

nlohmann::json recipe_to_json(const TransformRecipe& r) {
  return {{"scale", r.scale},
          {"augment", r.augment},
          {"augment_degree", r.augment_degree},
          {"expand", r.expand},
          {"polynomial", r.polynomial},
          {"polynomial_degree", r.polynomial_degree},
          {"leakage_mode", to_string(r.leakage_mode)}};
}

RunConfig config_from_json(const nlohmann::json& j, bool check_paths) {
  Section s(j, "");
  RunConfig c;

  std::string kind = "blood";
  s.get("dataset", kind);
  if (kind == "blood") {
    c.dataset = DatasetKind::blood;
  } else if (kind == "eit") {
    c.dataset = DatasetKind::eit;
  } else if (kind == "thermal") {
    c.dataset = DatasetKind::thermal;
  } else if (kind == "synthetic") {
    c.dataset = DatasetKind::synthetic;
  } else {
    throw ConfigError("dataset: unknown kind '" + kind + "' (blood, eit, thermal, synthetic)");
  }
  const bool tabular = c.dataset == DatasetKind::blood || c.dataset == DatasetKind::eit;
  c.label_column = c.dataset == DatasetKind::eit ? "Class" : "Classification";
  c.positive_label = c.dataset == DatasetKind::eit ? "car" : "2";
  if (c.dataset == DatasetKind::eit) c.ignore_columns = {"Case #"};

  s.get("csv", c.csv);
  s.get("label_column", c.label_column);
  s.get("positive_label", c.positive_label);
  s.get("ignore_columns", c.ignore_columns);
  s.get("eit_labels", c.eit_labels);
  s.get("drop_con_adi", c.drop_con_adi);
  s.get("thermal_dir", c.thermal_dir);
  s.get("seed", c.seed);
  s.get("test_fraction", c.test_fraction);
  s.get("augment_degree", c.augment_degree);
  if (s.has("leakage_mode")) {
    try {
      c.leakage_mode = leakage_mode_from_string(s.raw("leakage_mode").get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(std::string("leakage_mode: ") + e.what());
    }
  }
  s.get("both_modes", c.both_modes);
  s.get("jobs", c.jobs);
  s.get("output_dir", c.output_dir);
  s.get("run_id", c.run_id);

  if (!(c.test_fraction > 0 && c.test_fraction < 1)) throw ConfigError("test_fraction must lie in (0,1)");
  if (c.augment_degree < 2) throw ConfigError("augment_degree must be >= 2");
  if (c.eit_labels != 2 && c.eit_labels != 3 && c.eit_labels != 6) throw ConfigError("eit_labels must be 2, 3 or 6");
  if (c.jobs < 0) throw ConfigError("jobs must be >= 0");
  if (c.run_id.empty()) throw ConfigError("run_id must not be empty");

  TransformRecipe base;
  base.augment_degree = c.augment_degree;
  base.leakage_mode = c.leakage_mode;
  if (s.has("recipes")) {
    const auto& arr = s.raw("recipes");
    if (!arr.is_array() || arr.empty()) throw ConfigError("recipes must be a non-empty array");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      c.recipes.push_back(recipe_from_json(arr[i], "recipes[" + std::to_string(i) + "]", base));
    }
  } else {
    c.recipes = tabular_grid(c.augment_degree, c.leakage_mode);
  }
  c.tabular_recipe = base;
  if (s.has("tabular_recipe")) c.tabular_recipe = recipe_from_json(s.raw("tabular_recipe"), "tabular_recipe", base);

  // The cell the thesis tuned: expanded + augmented.
  c.hpo_recipe = base;
  c.hpo_recipe.expand = true;
  c.hpo_recipe.augment = true;
  if (s.has("hpo_recipe")) c.hpo_recipe = recipe_from_json(s.raw("hpo_recipe"), "hpo_recipe", base);

  if (s.has("roster")) {
    const auto& arr = s.raw("roster");
    if (!arr.is_array() || arr.empty()) throw ConfigError("roster must be a non-empty array");
    std::set<std::string> names;
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const std::string path = "roster[" + std::to_string(i) + "]";
      Section e(arr[i], path);
      LearnerSpec spec;
      e.get("family", spec.family);
      spec.name = spec.family;
      e.get("name", spec.name);
      if (e.has("params")) spec.params = e.raw("params");
      e.finish();
      const auto& fams = learner_families();
      if (std::find(fams.begin(), fams.end(), spec.family) == fams.end()) {
        throw ConfigError(path + ".family: unknown learner family '" + spec.family + "'");
      }
      if (!spec.params.is_object()) throw ConfigError(path + ".params must be an object");
      if (!names.insert(spec.name).second) throw ConfigError(path + ".name: duplicate model name '" + spec.name + "'");
      c.roster.push_back(std::move(spec));
    }
  } else {
    c.roster = default_roster();
  }

  if (s.has("sweep")) {
    Section e(s.raw("sweep"), "sweep");
    e.get("lo", c.sweep.lo);
    e.get("hi", c.sweep.hi);
    e.get("step", c.sweep.step);
    e.get("select_lo", c.sweep.select_lo);
    e.get("select_hi", c.sweep.select_hi);
    if (e.has("by")) {
      try {
        c.sweep.by = select_by_from_string(e.raw("by").get<std::string>());
      } catch (const std::exception& ex) {
        throw ConfigError(std::string("sweep.by: ") + ex.what());
      }
    }
    e.finish();
    if (!(c.sweep.step > 0) || !(c.sweep.lo <= c.sweep.hi) || !(c.sweep.select_lo <= c.sweep.select_hi)) {
      throw ConfigError("sweep: need step > 0, lo <= hi and select_lo <= select_hi");
    }
  }

  if (s.has("hpo")) {
    Section e(s.raw("hpo"), "hpo");
    e.get("iters", c.hpo.iters);
    e.get("algo", c.hpo.algo);
    e.get("families", c.hpo.families);
    e.get("folds", c.hpo.folds);
    e.get("metric", c.hpo.metric);
    e.get("gamma", c.hpo.gamma);
    e.get("n_candidates", c.hpo.n_candidates);
    e.get("n_startup", c.hpo.n_startup);
    e.finish();
  }
  if (c.hpo.iters < 1) throw ConfigError("hpo.iters: budget must be >= 1");
  if (c.hpo.algo != "tpe" && c.hpo.algo != "random") throw ConfigError("hpo.algo must be 'tpe' or 'random'");
  if (c.hpo.folds != 0 && c.hpo.folds < 2) throw ConfigError("hpo.folds must be 0 (holdout) or >= 2");
  if (!(c.hpo.gamma > 0 && c.hpo.gamma <= 1) || c.hpo.n_candidates < 1 || c.hpo.n_startup < 0) {
    throw ConfigError("hpo: gamma in (0,1], n_candidates >= 1, n_startup >= 0");
  }
  try {
    select_by_from_string(c.hpo.metric);
  } catch (const std::exception& e) {
    throw ConfigError(std::string("hpo.metric: ") + e.what());
  }
  for (const auto& f : c.hpo.families) {
    if (f != "gbt_x" && f != "gbt_l") throw ConfigError("hpo.families: no preset space for '" + f + "'");
  }

  c.synthetic.seed = c.seed;
  if (s.has("synthetic")) {
    Section e(s.raw("synthetic"), "synthetic");
    auto& o = c.synthetic;
    e.get("n_healthy", o.n_healthy);
    e.get("n_tumor", o.n_tumor);
    e.get("depth_lo", o.depth_lo);
    e.get("depth_hi", o.depth_hi);
    e.get("diameter_lo", o.diameter_lo);
    e.get("diameter_hi", o.diameter_hi);
    e.get("lateral_lo", o.lateral_lo);
    e.get("lateral_hi", o.lateral_hi);
    e.get("ambient_lo", o.ambient_lo);
    e.get("ambient_hi", o.ambient_hi);
    e.get("resolution", o.resolution);
    e.get("width", o.width);
    e.get("out_h", o.out_h);
    e.get("out_w", o.out_w);
    e.get("images_per_patient", o.images_per_patient);
    e.get("noise_sigma", o.noise_sigma);
    e.get("blur_sigma", o.blur_sigma);
    e.get("tol", o.tol);
    e.get("seed", o.seed);
    e.finish();
  }
  try {
    c.synthetic.validate();
  } catch (const std::exception& e) {
    throw ConfigError(std::string("synthetic: ") + e.what());
  }

  if (s.has("thermal")) {
    Section e(s.raw("thermal"), "thermal");
    auto& t = c.thermal;
    e.get("height", t.height);
    e.get("width", t.width);
    e.get("epochs", t.epochs);
    e.get("batch_size", t.batch_size);
    e.get("learning_rate", t.learning_rate);
    e.get("augment_degree", t.augment_degree);
    e.get("normalize_lo", t.normalize_lo);
    e.get("normalize_hi", t.normalize_hi);
    e.finish();
    if (t.height < 4 || t.width < 4 || t.epochs < 1 || t.batch_size < 1 || !(t.learning_rate > 0) ||
        t.augment_degree < 2) {
      throw ConfigError("thermal: need size >= 4, epochs/batch >= 1, learning_rate > 0, augment_degree >= 2");
    }
  }
  s.finish();

  if (tabular) {
    if (c.csv.empty()) c.csv = c.dataset == DatasetKind::eit ? "eit.csv" : "blood.csv";
    c.csv = resolve_path(c.csv, "csv", check_paths);
  }
  if (c.dataset == DatasetKind::thermal) {
    if (c.thermal_dir.empty()) throw ConfigError("thermal_dir is required for dataset 'thermal'");
    c.thermal_dir = resolve_path(c.thermal_dir, "thermal_dir", check_paths);
  }
  return c;
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json recipes_json = nlohmann::json::array();
  for (const auto& r : recipes) recipes_json.push_back(recipe_to_json(r));
  nlohmann::json roster_json = nlohmann::json::array();
  for (const auto& l : roster) roster_json.push_back({{"name", l.name}, {"family", l.family}, {"params", l.params}});
  const auto& o = synthetic;
  return {
      {"dataset", to_string(dataset)},
      {"csv", csv},
      {"label_column", label_column},
      {"positive_label", positive_label},
      {"ignore_columns", ignore_columns},
      {"eit_labels", eit_labels},
      {"drop_con_adi", drop_con_adi},
      {"thermal_dir", thermal_dir},
      {"seed", seed},
      {"test_fraction", test_fraction},
      {"augment_degree", augment_degree},
      {"leakage_mode", to_string(leakage_mode)},
      {"both_modes", both_modes},
      {"recipes", recipes_json},
      {"tabular_recipe", recipe_to_json(tabular_recipe)},
      {"hpo_recipe", recipe_to_json(hpo_recipe)},
      {"roster", roster_json},
      {"sweep",
       {{"lo", sweep.lo},
        {"hi", sweep.hi},
        {"step", sweep.step},
        {"select_lo", sweep.select_lo},
        {"select_hi", sweep.select_hi},
        {"by", to_string(sweep.by)}}},
      {"hpo",
       {{"iters", hpo.iters},
        {"algo", hpo.algo},
        {"families", hpo.families},
        {"folds", hpo.folds},
        {"metric", hpo.metric},
        {"gamma", hpo.gamma},
        {"n_candidates", hpo.n_candidates},
        {"n_startup", hpo.n_startup}}},
      {"synthetic",
       {{"n_healthy", o.n_healthy},
        {"n_tumor", o.n_tumor},
        {"depth_lo", o.depth_lo},
        {"depth_hi", o.depth_hi},
        {"diameter_lo", o.diameter_lo},
        {"diameter_hi", o.diameter_hi},
        {"lateral_lo", o.lateral_lo},
        {"lateral_hi", o.lateral_hi},
        {"ambient_lo", o.ambient_lo},
        {"ambient_hi", o.ambient_hi},
        {"resolution", o.resolution},
        {"width", o.width},
        {"out_h", o.out_h},
        {"out_w", o.out_w},
        {"images_per_patient", o.images_per_patient},
        {"noise_sigma", o.noise_sigma},
        {"blur_sigma", o.blur_sigma},
        {"tol", o.tol},
        {"seed", o.seed}}},
      {"thermal",
       {{"height", thermal.height},
        {"width", thermal.width},
        {"epochs", thermal.epochs},
        {"batch_size", thermal.batch_size},
        {"learning_rate", thermal.learning_rate},
        {"augment_degree", thermal.augment_degree},
        {"normalize_lo", thermal.normalize_lo},
        {"normalize_hi", thermal.normalize_hi}}},
      {"jobs", jobs},
      {"output_dir", output_dir},
      {"run_id", run_id},
  };
}

RunConfig parse_config(const fs::path& path, bool check_paths) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return config_from_json(j, check_paths);
}

void write_config_echo(const fs::path& path, const RunConfig& config) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << config.to_json().dump(2) << '\n';
}

}  // namespace thermoscan
