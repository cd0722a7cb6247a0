// thermoscan command-line driver. Exit codes: 0 success, 1 failed cell or
// runtime error, 2 configuration error.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "thermoscan/bioheat.hpp"
#include "thermoscan/config.hpp"
#include "thermoscan/doe.hpp"
#include "thermoscan/eda.hpp"
#include "thermoscan/kernels.hpp"
#include "thermoscan/model_io.hpp"

namespace fs = std::filesystem;
using namespace thermoscan;

namespace {

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> jobs;
  std::string resume;
  bool both_modes = false;
  std::string out;
  // simulate
  std::optional<int> healthy, tumor;
  // optimize
  std::optional<int> iters;
  // evaluate
  std::string model, test_csv, train_csv, family;
};

RunConfig load_config(const Flags& f, bool check_paths) {
  nlohmann::json j = nlohmann::json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw ConfigError("cannot open config " + f.config);
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("config " + f.config + " is not valid JSON: " + e.what());
    }
  }
  // Flags override scalar fields before validation so the echo records them.
  if (f.seed) {
    j["seed"] = *f.seed;
    if (j.contains("synthetic") && j["synthetic"].is_object()) j["synthetic"]["seed"] = *f.seed;
  }
  if (f.jobs) j["jobs"] = *f.jobs;
  if (f.both_modes) j["both_modes"] = true;
  if (f.iters) {
    if (*f.iters < 1) throw ConfigError("--iters: budget must be >= 1");
    j["hpo"]["iters"] = *f.iters;
  }
  if (f.healthy || f.tumor) {
    if (f.healthy) j["synthetic"]["n_healthy"] = *f.healthy;
    if (f.tumor) j["synthetic"]["n_tumor"] = *f.tumor;
  }
  if (!f.out.empty()) {
    j["output_dir"] = f.out;
    j["run_id"] = ".";
  }
  auto c = config_from_json(j, check_paths);
  if (c.jobs > 0) kernels::set_max_threads(c.jobs);
  return c;
}

TabularDataset load_tabular(const RunConfig& c) {
  auto ds = load_csv(c.csv, c.label_column, c.ignore_columns);
  if (c.dataset == DatasetKind::eit) ds = relabel_eit(ds, eit_label_mode_from_int(c.eit_labels), c.drop_con_adi);
  if (ds.label_names.size() == 2) ds = with_positive_label(ds, c.positive_label);
  return ds;
}

std::vector<PatientRecord> load_images(const RunConfig& c) {
  if (c.dataset == DatasetKind::thermal) return load_thermal_directory(c.thermal_dir);
  return bioheat::generate_synthetic_set(c.synthetic).records;
}

fs::path prepare_run_dir(const RunConfig& c) {
  const auto dir = c.run_dir();
  fs::create_directories(dir);
  write_config_echo(dir / "run_config.json", c);
  return dir;
}

bool tabular(const RunConfig& c) { return c.dataset == DatasetKind::blood || c.dataset == DatasetKind::eit; }

int cmd_ingest(const Flags& f) {
  const auto c = load_config(f, true);
  const auto dir = prepare_run_dir(c);
  nlohmann::json summary;
  if (tabular(c)) {
    const auto ds = load_tabular(c);
    const auto counts = ds.class_counts();
    summary = {{"rows", ds.size()}, {"features", ds.width()}, {"feature_names", ds.feature_names}};
    for (std::size_t k = 0; k < counts.size(); ++k) summary["class_counts"][ds.label_names[k]] = counts[k];
    save_csv(dir / "dataset.csv", ds, "label");
  } else {
    const auto recs = load_images(c);
    std::size_t images = 0, sick = 0;
    for (const auto& r : recs) {
      images += r.thermograms.size();
      sick += r.label == 1 ? 1 : 0;
    }
    summary = {{"patients", recs.size()}, {"sick_patients", sick}, {"images", images}};
  }
  std::ofstream(dir / "ingest.json") << summary.dump(2) << '\n';
  std::cout << summary.dump(2) << '\n';
  return 0;
}

int cmd_simulate(const Flags& f) {
  const auto c = load_config(f, false);
  const auto dir = prepare_run_dir(c);
  const auto set = bioheat::generate_synthetic_set(c.synthetic);
  bioheat::write_synthetic_set(dir, set, c.synthetic);
  std::cout << "wrote " << set.records.size() << " synthetic patients to " << dir.string() << '\n';
  return 0;
}

int cmd_engineer(const Flags& f) {
  const auto c = load_config(f, true);
  if (!tabular(c)) throw ConfigError("engineer works on tabular datasets (blood, eit)");
  const auto dir = prepare_run_dir(c);
  const auto ds = load_tabular(c);
  const auto split = train_test_split(ds, c.test_fraction, c.seed, true);
  const auto out = apply_recipe(split.train, split.test, c.tabular_recipe, derive_seed(c.seed, {0xCE11u}));
  save_csv(dir / "train.csv", out.train, "label");
  save_csv(dir / "test.csv", out.test, "label");
  std::cout << c.tabular_recipe.label() << ": train " << out.train.size() << "x" << out.train.width() << ", test "
            << out.test.size() << "x" << out.test.width() << '\n';
  return 0;
}

int cmd_eda(const Flags& f) {
  const auto c = load_config(f, true);
  if (!tabular(c)) throw ConfigError("eda works on tabular datasets (blood, eit)");
  const auto dir = prepare_run_dir(c);
  const auto ds = load_tabular(c);
  write_correlation_csv(dir / "correlation.csv", pearson_matrix(ds, true));
  write_pair_grid_csv(dir / "pairs.csv", ds);
  const auto p = pca_2d(ds);
  write_projection_csv(dir / "pca.csv", p, ds);
  const auto lc = label_correlations(ds);
  for (std::size_t j = 0; j < lc.size(); ++j) std::printf("%-14s r(label) = %+.3f\n", ds.feature_names[j].c_str(), lc[j]);
  std::printf("PCA explained variance ratio: %.4f, %.4f%s\n", p.explained_ratio[0], p.explained_ratio[1],
              p.rank_deficient ? " (rank < 2)" : "");
  return 0;
}

int cmd_doe(const Flags& f) {
  const auto c = load_config(f, true);
  const auto dir = prepare_run_dir(c);
  std::vector<ResultRow> rows;
  if (tabular(c)) {
    TabularPlan plan;
    plan.dataset_id = to_string(c.dataset);
    plan.data = load_tabular(c);
    plan.roster = c.roster;
    plan.test_fraction = c.test_fraction;
    plan.seed = c.seed;
    plan.sweep = c.sweep;
    plan.jobs = c.jobs;
    plan.curve_dir = dir / "curves";
    std::vector<LeakageMode> modes = {c.leakage_mode};
    if (c.both_modes) modes = {LeakageMode::paper_faithful, LeakageMode::leak_free};
    for (auto mode : modes) {
      plan.recipes = c.recipes;
      for (auto& r : plan.recipes) r.leakage_mode = mode;
      if (modes.size() > 1) plan.curve_dir = dir / "curves" / to_string(mode);
      auto part = run_doe(plan);
      rows.insert(rows.end(), part.begin(), part.end());
    }
  } else {
    ThermalPlan plan;
    plan.records = load_images(c);
    plan.height = c.thermal.height;
    plan.width = c.thermal.width;
    plan.test_fraction = c.test_fraction;
    plan.augment_degree = c.thermal.augment_degree;
    if (c.thermal.normalize_lo < c.thermal.normalize_hi) {
      plan.normalize = NormalizeMode::fixed(c.thermal.normalize_lo, c.thermal.normalize_hi);
    }
    plan.train.epochs = c.thermal.epochs;
    plan.train.batch_size = c.thermal.batch_size;
    plan.learning_rate = c.thermal.learning_rate;
    plan.seed = c.seed;
    plan.sweep = c.sweep;
    rows = run_thermal_doe(plan);
  }
  write_results_csv(dir / "phase1.csv", rows);
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.ok ? 0 : 1;
  std::cout << rows.size() << " result rows (" << failed << " failed) in " << (dir / "phase1.csv").string() << '\n';
  return failed > 0 ? 1 : 0;
}

int cmd_optimize(const Flags& f) {
  const auto c = load_config(f, true);
  if (!tabular(c)) throw ConfigError("optimize works on tabular datasets (blood, eit)");
  const auto dir = prepare_run_dir(c);
  HpoPlan plan;
  plan.dataset_id = to_string(c.dataset);
  plan.data = load_tabular(c);
  plan.recipe = c.hpo_recipe;
  plan.families = c.hpo.families;
  plan.n_iters = c.hpo.iters;
  plan.algo = hpo::algo_from_string(c.hpo.algo);
  plan.tpe.gamma = c.hpo.gamma;
  plan.tpe.n_candidates = c.hpo.n_candidates;
  plan.tpe.n_startup = c.hpo.n_startup;
  plan.cv.folds = c.hpo.folds;
  plan.cv.metric = select_by_from_string(c.hpo.metric);
  plan.test_fraction = c.test_fraction;
  plan.seed = c.seed;
  plan.sweep = c.sweep;
  plan.history_dir = dir;
  plan.model_dir = dir / "models";
  if (!f.resume.empty()) {
    plan.resume = true;
    if (fs::is_directory(f.resume)) {
      plan.history_dir = f.resume;
    } else {
      plan.history_file = f.resume;
    }
  }
  const auto rows = run_hpo_phase(plan);
  write_phase2_csv(dir / "phase2.csv", rows);
  bool failed = false;
  for (const auto& r : rows) {
    failed |= !r.test.ok;
    std::printf("%-6s %-6s cv=%.4f test acc=%s\n", r.family.c_str(), r.phase.c_str(), r.cv_score,
                r.test.metrics.accuracy ? std::to_string(*r.test.metrics.accuracy).c_str() : "n/a");
  }
  return failed ? 1 : 0;
}

int cmd_evaluate(const Flags& f) {
  const auto c = load_config(f, false);
  if (f.test_csv.empty()) throw ConfigError("evaluate needs --test <csv>");
  if (f.model.empty() == f.family.empty()) throw ConfigError("evaluate needs exactly one of --model or --family");
  const auto dir = prepare_run_dir(c);
  auto read = [&](const std::string& path) {
    auto ds = load_csv(path, c.label_column, c.ignore_columns);
    if (ds.label_names.size() == 2) ds = with_positive_label(ds, c.positive_label);
    return ds;
  };
  const auto test = read(f.test_csv);
  ClassifierPtr model;
  if (!f.model.empty()) {
    model = load_model(f.model);
  } else {
    if (f.train_csv.empty()) throw ConfigError("--family needs --train <csv>");
    model = train_learner(f.family, read(f.train_csv), nlohmann::json::object(), c.seed);
    save_model(dir / (f.family + ".model.json"), *model);
  }
  const auto res = threshold_sweep(model->predict_scores(test.rows), test.labels, c.sweep);
  write_curve_csv(dir / "curve.csv", res.curve);
  ResultRow row;
  row.dataset = f.test_csv;
  row.mode = "evaluate";
  row.recipe = "given";
  row.model = model->family();
  row.metrics = res.best;
  row.threshold = res.best_threshold;
  write_results_csv(dir / "evaluation.csv", {row}, false);
  std::cout << summarize_results({row});
  return 0;
}

int cmd_report(const Flags& f) {
  const auto c = load_config(f, false);
  const auto dir = c.run_dir();
  const auto p1 = dir / "phase1.csv";
  if (!fs::exists(p1)) throw DataError("no phase1.csv in " + dir.string());
  auto text = "# Results\n\n## Design of experiments\n\n" + summarize_results(read_results_csv(p1));
  const auto p2 = dir / "phase2.csv";
  if (fs::exists(p2)) {
    std::ifstream in(p2);
    text += "\n## Hyper-parameter search\n\n```\n";
    text += std::string(std::istreambuf_iterator<char>(in), {});
    text += "```\n";
  }
  std::ofstream(dir / "summary.md") << text;
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"thermoscan: breast-screening experiment toolkit"};
  app.require_subcommand(1);
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", f.seed, "Override the run seed");
  app.add_option("--jobs", f.jobs, "Worker threads (default: logical cores)");
  app.add_option("--out", f.out, "Output directory for this run");
  app.add_flag("--both-modes", f.both_modes, "Run DOE in paper-faithful and leak-free modes");

  auto* ingest = app.add_subcommand("ingest", "Load a dataset and report its shape");
  auto* simulate = app.add_subcommand("simulate", "Generate synthetic bioheat thermograms");
  simulate->add_option("--healthy", f.healthy, "Healthy patients");
  simulate->add_option("--tumor", f.tumor, "Tumour patients");
  auto* engineer = app.add_subcommand("engineer", "Apply the configured recipe and export train/test CSVs");
  auto* eda = app.add_subcommand("eda", "Correlation, pair-grid and PCA exports");
  auto* doe = app.add_subcommand("doe", "Phase-1 design-of-experiments grid");
  auto* optimize = app.add_subcommand("optimize", "Phase-2 hyper-parameter search");
  optimize->add_option("--iters", f.iters, "Search budget per family");
  optimize->add_option("--resume", f.resume, "Continue from a trial log (file) or log directory");
  auto* evaluate = app.add_subcommand("evaluate", "Score a model on a test CSV");
  evaluate->add_option("--model", f.model, "Saved model file");
  evaluate->add_option("--family", f.family, "Train this family on --train instead of loading a model");
  evaluate->add_option("--train", f.train_csv, "Training CSV for --family");
  evaluate->add_option("--test", f.test_csv, "Test CSV");
  auto* report = app.add_subcommand("report", "Summarise result CSVs of a run");

  for (auto* sub : {ingest, simulate, engineer, eda, doe, optimize, evaluate, report}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*ingest) return cmd_ingest(f);
    if (*simulate) return cmd_simulate(f);
    if (*engineer) return cmd_engineer(f);
    if (*eda) return cmd_eda(f);
    if (*doe) return cmd_doe(f);
    if (*optimize) return cmd_optimize(f);
    if (*evaluate) return cmd_evaluate(f);
    if (*report) return cmd_report(f);
  } catch (const ConfigError& e) {
    spdlog::error("configuration error: {}", e.what());
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 2;
}
