#include "thermoscan/doe.hpp"

#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

#include <omp.h>
#include "thermoscan/model_io.hpp"
#include <spdlog/spdlog.h>

namespace thermoscan {

namespace fs = std::filesystem;

std::vector<TransformRecipe> tabular_grid(int augment_degree, LeakageMode mode) {
  std::vector<TransformRecipe> out;
  for (int bits = 0; bits < 16; ++bits) {
    TransformRecipe r;
    r.scale = bits & 8;
    r.augment = bits & 4;
    r.expand = bits & 2;
    r.polynomial = bits & 1;
    r.augment_degree = augment_degree;
    r.leakage_mode = mode;
    out.push_back(r);
  }
  return out;
}

std::string ThermalToggles::label() const {
  std::string s;
  auto add = [&](bool on, const char* name) {
    if (!on) return;
    if (!s.empty()) s += '+';
    s += name;
  };
  add(mask, "masked");
  add(augment, "augmented");
  add(normalize, "normalized");
  return s.empty() ? "original" : s;
}

std::vector<ThermalToggles> thermal_grid() {
  std::vector<ThermalToggles> out;
  for (int bits = 0; bits < 8; ++bits) out.push_back({(bits & 4) != 0, (bits & 2) != 0, (bits & 1) != 0});
  return out;
}

namespace {

double elapsed_ms(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt6(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string fmt_opt(const std::optional<double>& v) { return v ? fmt6(*v) : ""; }

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string safe_name(std::string s) {
  for (auto& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '_' && c != '-') c = '_';
  return s;
}

ResultRow evaluate_model(const Classifier& model, const TabularDataset& test, const SweepOptions& sweep,
                         SweepResult* curve_out) {
  ResultRow row;
  const auto scores = model.predict_scores(test.rows);
  auto res = threshold_sweep(scores, test.labels, sweep);
  row.metrics = res.best;
  row.threshold = res.best_threshold;
  if (curve_out) *curve_out = std::move(res);
  return row;
}

int thread_count(int jobs) { return jobs > 0 ? jobs : omp_get_max_threads(); }

}  // namespace

std::vector<ResultRow> run_doe(const TabularPlan& plan) {
  if (plan.recipes.empty() || plan.roster.empty()) throw ConfigError("DOE plan needs recipes and a roster");
  plan.data.validate();
  require_binary_labels(plan.data);
  const auto split = train_test_split(plan.data, plan.test_fraction, plan.seed, true);
  if (plan.curve_dir) fs::create_directories(*plan.curve_dir);

  const std::size_t n_cells = plan.recipes.size(), n_models = plan.roster.size();
  std::vector<ResultRow> rows(n_cells * n_models);
  const int cells = static_cast<int>(n_cells);

#pragma omp parallel for schedule(dynamic) num_threads(thread_count(plan.jobs))
  for (int ci = 0; ci < cells; ++ci) {
    const auto cell = static_cast<std::size_t>(ci);
    const auto& recipe = plan.recipes[cell];
    std::optional<EngineeredPair> data;
    std::string cell_error;
    try {
      data = apply_recipe(split.train, split.test, recipe, derive_seed(plan.seed, {0xCE11u, cell}));
    } catch (const std::exception& e) {
      cell_error = e.what();
    }
    for (std::size_t m = 0; m < n_models; ++m) {
      auto& row = rows[cell * n_models + m];
      const auto& spec = plan.roster[m];
      const auto start = std::chrono::steady_clock::now();
      if (!data) {
        row.ok = false;
        row.error = cell_error;
      } else {
        try {
          auto model = train_learner(spec.family, data->train, spec.params, derive_seed(plan.seed, {0x30DEu, cell, m}));
          SweepResult curve;
          row = evaluate_model(*model, data->test, plan.sweep, plan.curve_dir ? &curve : nullptr);
          if (plan.curve_dir) {
            write_curve_csv(*plan.curve_dir / (safe_name(recipe.label()) + "_" + safe_name(spec.name) + ".csv"),
                            curve.curve);
          }
        } catch (const std::exception& e) {
          row.ok = false;
          row.error = e.what();
        }
      }
      row.dataset = plan.dataset_id;
      row.mode = to_string(recipe.leakage_mode);
      row.recipe = recipe.label();
      row.model = spec.name;
      row.duration_ms = elapsed_ms(start);
      if (!row.ok) spdlog::warn("cell '{}' model '{}' failed: {}", row.recipe, row.model, row.error);
    }
  }
  return rows;
}

void write_results_csv(const fs::path& path, const std::vector<ResultRow>& rows, bool include_time) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "dataset,mode,recipe,model,accuracy,precision,recall,specificity,npv,f1,roc_auc,threshold";
  if (include_time) f << ",time_ms";
  f << ",status,error\n";
  for (const auto& r : rows) {
    const auto& m = r.metrics;
    f << csv_field(r.dataset) << ',' << csv_field(r.mode) << ',' << csv_field(r.recipe) << ',' << csv_field(r.model)
      << ',' << fmt_opt(m.accuracy) << ',' << fmt_opt(m.precision) << ',' << fmt_opt(m.recall) << ','
      << fmt_opt(m.specificity) << ',' << fmt_opt(m.npv) << ',' << fmt_opt(m.f1) << ',' << fmt_opt(m.roc_auc) << ','
      << (r.ok ? fmt6(r.threshold) : "");
    if (include_time) f << ',' << fmt6(r.duration_ms);
    f << ',' << (r.ok ? "ok" : "failed") << ',' << csv_field(r.error) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(f, line)) throw DataError(path.string() + ": empty results file");
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* needed : {"dataset", "mode", "recipe", "model", "accuracy", "status"}) {
    if (!col.contains(needed)) throw DataError(path.string() + ": missing column '" + needed + "'");
  }
  auto opt = [](const std::string& s) -> std::optional<double> {
    if (s.empty()) return std::nullopt;
    return std::stod(s);
  };
  std::vector<ResultRow> rows;
  std::size_t lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto v = split_csv_line(line);
    if (v.size() != header.size()) throw DataError(path.string() + ":" + std::to_string(lineno) + ": wrong field count");
    auto get = [&](const char* name) -> std::string { return col.contains(name) ? v[col[name]] : std::string(); };
    ResultRow r;
    r.dataset = get("dataset");
    r.mode = get("mode");
    r.recipe = get("recipe");
    r.model = get("model");
    r.metrics.accuracy = opt(get("accuracy"));
    r.metrics.precision = opt(get("precision"));
    r.metrics.recall = opt(get("recall"));
    r.metrics.specificity = opt(get("specificity"));
    r.metrics.npv = opt(get("npv"));
    r.metrics.f1 = opt(get("f1"));
    r.metrics.roc_auc = opt(get("roc_auc"));
    r.threshold = opt(get("threshold")).value_or(0.0);
    r.duration_ms = opt(get("time_ms")).value_or(0.0);
    r.ok = get("status") == "ok";
    r.error = get("error");
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<Phase2Row> run_hpo_phase(const HpoPlan& plan) {
  if (plan.n_iters < 1) throw ConfigError("HPO budget must be >= 1");
  plan.data.validate();
  require_binary_labels(plan.data);
  const auto split = train_test_split(plan.data, plan.test_fraction, plan.seed, true);
  const auto data = apply_recipe(split.train, split.test, plan.recipe, derive_seed(plan.seed, {0xCE11u}));
  if (plan.history_dir) fs::create_directories(*plan.history_dir);

  std::vector<Phase2Row> out;
  for (const auto& family : plan.families) {
    const auto space = hpo::preset_space(family);
    hpo::CvOptions cv = plan.cv;
    cv.seed = derive_seed(plan.seed, {0xC5u});
    const auto objective = hpo::cv_objective(family, data.train, cv);
    const std::uint64_t model_seed = derive_seed(plan.seed, {0x30DEu});

    auto run_row = [&](const std::string& phase, const nlohmann::json& params, double cv_score, std::size_t trials) {
      Phase2Row row;
      row.family = family;
      row.phase = phase;
      row.params = params;
      row.cv_score = cv_score;
      row.trials = trials;
      const auto start = std::chrono::steady_clock::now();
      try {
        auto model = train_learner(family, data.train, params, model_seed);
        row.test = evaluate_model(*model, data.test, plan.sweep, nullptr);
        if (plan.model_dir && phase == "phase2") {
          fs::create_directories(*plan.model_dir);
          save_model(*plan.model_dir / (family + ".model.json"), *model);
        }
      } catch (const std::exception& e) {
        row.test.ok = false;
        row.test.error = e.what();
      }
      row.test.duration_ms = elapsed_ms(start);
      row.test.dataset = plan.dataset_id;
      row.test.mode = to_string(plan.recipe.leakage_mode);
      row.test.recipe = plan.recipe.label();
      row.test.model = family;
      return row;
    };

    const double default_cv = 1.0 - objective(nlohmann::json::object());
    out.push_back(run_row("phase1", nlohmann::json::object(), default_cv, 0));

    hpo::OptimizeOptions opt;
    opt.n_iters = plan.n_iters;
    opt.algo = plan.algo;
    opt.seed = derive_seed(plan.seed, {0x790u});
    opt.tpe = plan.tpe;
    opt.resume = plan.resume;
    if (plan.history_dir) opt.history_path = *plan.history_dir / (family + "_trials.jsonl");
    if (plan.history_file) {
      if (plan.families.size() != 1) throw ConfigError("a single history file needs exactly one family");
      opt.history_path = *plan.history_file;
    }
    const auto history = hpo::optimize(objective, space, opt);
    const auto best = history.best();
    if (!best) {
      Phase2Row row;
      row.family = family;
      row.phase = "phase2";
      row.trials = history.trials.size();
      row.test.ok = false;
      row.test.error = "every trial failed";
      row.test.dataset = plan.dataset_id;
      row.test.model = family;
      out.push_back(row);
      continue;
    }
    out.push_back(run_row("phase2", best->params, 1.0 - best->loss, history.trials.size()));
  }
  return out;
}

void write_phase2_csv(const fs::path& path, const std::vector<Phase2Row>& rows, bool include_time) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  f << "dataset,recipe,family,phase,trials,cv_score,accuracy,precision,recall,specificity,npv,f1,roc_auc,threshold";
  if (include_time) f << ",time_ms";
  f << ",status,params\n";
  for (const auto& r : rows) {
    const auto& m = r.test.metrics;
    f << csv_field(r.test.dataset) << ',' << csv_field(r.test.recipe) << ',' << r.family << ',' << r.phase << ','
      << r.trials << ',' << fmt6(r.cv_score) << ',' << fmt_opt(m.accuracy) << ',' << fmt_opt(m.precision) << ','
      << fmt_opt(m.recall) << ',' << fmt_opt(m.specificity) << ',' << fmt_opt(m.npv) << ',' << fmt_opt(m.f1) << ','
      << fmt_opt(m.roc_auc) << ',' << (r.test.ok ? fmt6(r.test.threshold) : "");
    if (include_time) f << ',' << fmt6(r.test.duration_ms);
    f << ',' << (r.test.ok ? "ok" : "failed") << ',' << csv_field(r.params.dump()) << '\n';
  }
}

ImageSet prepare_images(const std::vector<PatientRecord>& records, const ThermalToggles& toggles, std::size_t height,
                        std::size_t width, const NormalizeMode& normalize_mode, int augment_degree,
                        std::uint64_t seed) {
  std::vector<PatientRecord> prepared;
  for (const auto& rec : records) {
    PatientRecord p = rec;
    for (auto& t : p.thermograms) {
      if (toggles.mask && rec.mask) t = mask_and_crop(t, *rec.mask);
      t = resize_bilinear(t, height, width);
      if (toggles.normalize) t = normalize(t, normalize_mode);
    }
    prepared.push_back(std::move(p));
  }
  if (toggles.augment) {
    auto ops = std::vector<ImageOp>{ImageOp::hflip(), ImageOp::vflip()};
    if (height == width) ops.push_back(ImageOp::rot90());
    if (toggles.normalize) {
      ops.push_back(ImageOp::gaussian(0.01));
      ops.push_back(ImageOp::salt_pepper(0.01));
    }
    prepared = augment_images(prepared, ops, augment_degree, seed);
  }
  ImageSet out;
  std::size_t n = 0;
  for (const auto& p : prepared) n += p.thermograms.size();
  out.rows = Matrix(n, height * width);
  std::size_t r = 0;
  for (const auto& p : prepared) {
    for (const auto& t : p.thermograms) {
      if (t.height() != height || t.width() != width) throw DataError("image size mismatch after preparation");
      std::copy(t.matrix.data().begin(), t.matrix.data().end(), out.rows.row(r).begin());
      out.labels.push_back(p.label);
      out.patients.push_back(p.patient_id);
      ++r;
    }
  }
  return out;
}

std::vector<ResultRow> run_thermal_doe(const ThermalPlan& plan) {
  if (plan.records.empty()) throw DataError("thermal DOE needs patient records");
  const auto split = patient_split(plan.records, plan.test_fraction, plan.seed);
  std::vector<ResultRow> rows;
  for (std::size_t cell = 0; cell < plan.grid.size(); ++cell) {
    const auto& toggles = plan.grid[cell];
    ResultRow row;
    row.dataset = "thermal";
    row.mode = "thermal";
    row.recipe = toggles.label();
    row.model = "cnn";
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto train = prepare_images(split.train, toggles, plan.height, plan.width, plan.normalize,
                                        plan.augment_degree, derive_seed(plan.seed, {0x1A6u, cell}));
      ThermalToggles test_toggles = toggles;
      test_toggles.augment = false;
      const auto test = prepare_images(split.test, test_toggles, plan.height, plan.width, plan.normalize,
                                       plan.augment_degree, 0);
      const auto spec = nn::standard_cnn({1, plan.height, plan.width}, 2, 8, 16, 0.25, plan.learning_rate);
      auto opts = plan.train;
      opts.seed = derive_seed(plan.seed, {0xC22u, cell});
      // Raw temperatures are standardised per pixel so the net sees O(1) inputs.
      const auto model = nn::nn_train(spec, train.rows, train.labels, opts, !toggles.normalize);
      TabularDataset test_ds;
      test_ds.rows = test.rows;
      test_ds.labels = test.labels;
      const auto r = evaluate_model(model, test_ds, plan.sweep, nullptr);
      row.metrics = r.metrics;
      row.threshold = r.threshold;
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    row.duration_ms = elapsed_ms(start);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string summarize_results(const std::vector<ResultRow>& rows) {
  std::ostringstream out;
  bool footnote = false;
  auto cell = [&](const std::optional<double>& v) {
    if (v) {
      char buf[16];
      std::snprintf(buf, sizeof buf, "%.2f", *v);
      return std::string(buf);
    }
    footnote = true;
    return std::string("0.00*");
  };
  std::map<std::pair<std::string, std::string>, const ResultRow*> best;
  std::vector<std::pair<std::string, std::string>> order;
  for (const auto& r : rows) {
    const auto key = std::make_pair(r.dataset + " / " + r.mode, r.recipe);
    if (!best.contains(key)) {
      order.push_back(key);
      best[key] = nullptr;
    }
    if (!r.ok) continue;
    auto& b = best[key];
    if (!b || r.metrics.accuracy.value_or(0) > b->metrics.accuracy.value_or(0)) b = &r;
  }
  out << "| Data | Cell | Best model | Accuracy | Precision | Recall | F1 | ROC AUC | Threshold |\n";
  out << "|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& key : order) {
    const auto* r = best[key];
    if (!r) {
      out << "| " << key.first << " | " << key.second << " | (all failed) | | | | | | |\n";
      continue;
    }
    const auto& m = r->metrics;
    char thr[16];
    std::snprintf(thr, sizeof thr, "%.2f", r->threshold);
    out << "| " << key.first << " | " << key.second << " | " << r->model << " | " << cell(m.accuracy) << " | "
        << cell(m.precision) << " | " << cell(m.recall) << " | " << cell(m.f1) << " | " << cell(m.roc_auc) << " | "
        << thr << " |\n";
  }
  if (footnote) out << "\n\\* metric undefined (zero denominator); shown as 0.00.\n";
  return out.str();
}

}  // namespace thermoscan
