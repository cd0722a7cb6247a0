#include "thermoscan/hpo.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>

#include <omp.h>

#include "thermoscan/registry.hpp"

namespace thermoscan::hpo {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

bool is_integral(double v) { return std::floor(v) == v && std::abs(v) < 9e15; }

double log_sum_exp(const std::vector<double>& xs) {
  const double m = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : xs) s += std::exp(x - m);
  return m + std::log(s);
}

const char* kind_name(Dimension::Kind k) {
  switch (k) {
    case Dimension::Kind::uniform: return "uniform";
    case Dimension::Kind::loguniform: return "loguniform";
    case Dimension::Kind::quniform: return "quniform";
    case Dimension::Kind::choice: return "choice";
  }
  return "uniform";
}

}  // namespace

// --- dimensions ---------------------------------------------------------------------

Dimension Dimension::uniform(std::string name, double a, double b) {
  return {std::move(name), Kind::uniform, a, b, 1.0, {}};
}
Dimension Dimension::loguniform(std::string name, double a, double b) {
  return {std::move(name), Kind::loguniform, a, b, 1.0, {}};
}
Dimension Dimension::quniform(std::string name, double a, double b, double q) {
  return {std::move(name), Kind::quniform, a, b, q, {}};
}
Dimension Dimension::choice(std::string name, std::vector<nlohmann::json> values) {
  return {std::move(name), Kind::choice, 0.0, 1.0, 1.0, std::move(values)};
}

double Dimension::lo() const { return kind == Kind::loguniform ? std::log(a) : a; }
double Dimension::hi() const { return kind == Kind::loguniform ? std::log(b) : b; }

nlohmann::json Dimension::emit(double x) const {
  switch (kind) {
    case Kind::uniform: return std::clamp(x, a, b);
    case Kind::loguniform: return std::clamp(std::exp(x), a, b);
    case Kind::quniform: {
      double v = a + std::round((x - a) / q) * q;
      if (v > b) v -= q;
      if (v < a) v = a;
      if (is_integral(a) && is_integral(q)) return static_cast<std::int64_t>(std::llround(v));
      return v;
    }
    case Kind::choice: {
      const auto i = static_cast<std::size_t>(std::clamp(x, 0.0, static_cast<double>(choices.size() - 1)));
      return choices[i];
    }
  }
  return x;
}

double Dimension::working(const nlohmann::json& value) const {
  const double v = value.get<double>();
  return kind == Kind::loguniform ? std::log(v) : v;
}

int Dimension::choice_index(const nlohmann::json& value) const {
  for (std::size_t i = 0; i < choices.size(); ++i) {
    if (choices[i] == value) return static_cast<int>(i);
  }
  return -1;
}

void SearchSpace::validate() const {
  if (dims.empty()) throw ConfigError("search space has no dimensions");
  std::set<std::string> names;
  for (const auto& d : dims) {
    if (d.name.empty()) throw ConfigError("search dimension without a name");
    if (!names.insert(d.name).second) throw ConfigError("duplicate search dimension '" + d.name + "'");
    if (d.kind == Dimension::Kind::choice) {
      if (d.choices.empty()) throw ConfigError("choice dimension '" + d.name + "' is empty");
      continue;
    }
    if (!(d.a < d.b)) throw ConfigError("dimension '" + d.name + "' needs a < b");
    if (d.kind == Dimension::Kind::loguniform && d.a <= 0) {
      throw ConfigError("loguniform dimension '" + d.name + "' needs a > 0");
    }
    if (d.kind == Dimension::Kind::quniform && !(d.q > 0)) {
      throw ConfigError("quniform dimension '" + d.name + "' needs q > 0");
    }
  }
}

bool SearchSpace::contains(const nlohmann::json& params) const {
  if (!params.is_object() || params.size() != dims.size()) return false;
  for (const auto& d : dims) {
    if (!params.contains(d.name)) return false;
    const auto& v = params.at(d.name);
    if (d.kind == Dimension::Kind::choice) {
      if (d.choice_index(v) < 0) return false;
      continue;
    }
    if (!v.is_number()) return false;
    const double x = v.get<double>();
    const double tol = 1e-12 * std::max(1.0, std::abs(d.b));
    if (x < d.a - tol || x > d.b + tol) return false;
    if (d.kind == Dimension::Kind::quniform) {
      const double steps = (x - d.a) / d.q;
      if (std::abs(steps - std::round(steps)) > 1e-9) return false;
    }
  }
  return true;
}

nlohmann::json SearchSpace::to_json() const {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& d : dims) {
    nlohmann::json j = {{"name", d.name}, {"kind", kind_name(d.kind)}};
    if (d.kind == Dimension::Kind::choice) {
      j["values"] = d.choices;
    } else {
      j["low"] = d.a;
      j["high"] = d.b;
      if (d.kind == Dimension::Kind::quniform) j["q"] = d.q;
    }
    out.push_back(j);
  }
  return out;
}

SearchSpace SearchSpace::from_json(const nlohmann::json& j) {
  SearchSpace s;
  try {
    for (const auto& e : j) {
      const auto kind = e.at("kind").get<std::string>();
      const auto name = e.at("name").get<std::string>();
      if (kind == "choice") {
        s.dims.push_back(Dimension::choice(name, e.at("values").get<std::vector<nlohmann::json>>()));
      } else if (kind == "uniform") {
        s.dims.push_back(Dimension::uniform(name, e.at("low").get<double>(), e.at("high").get<double>()));
      } else if (kind == "loguniform") {
        s.dims.push_back(Dimension::loguniform(name, e.at("low").get<double>(), e.at("high").get<double>()));
      } else if (kind == "quniform") {
        s.dims.push_back(
            Dimension::quniform(name, e.at("low").get<double>(), e.at("high").get<double>(), e.at("q").get<double>()));
      } else {
        throw ConfigError("unknown dimension kind '" + kind + "'");
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed search space: ") + e.what());
  }
  s.validate();
  return s;
}

// --- trials ---------------------------------------------------------------------

nlohmann::json Trial::to_json() const {
  nlohmann::json j = {{"params", params},
                      {"loss", status == TrialStatus::ok ? nlohmann::json(loss) : nlohmann::json(nullptr)},
                      {"status", status == TrialStatus::ok ? "ok" : "failed"},
                      {"duration_ms", duration_ms}};
  if (!error.empty()) j["error"] = error;
  return j;
}

Trial Trial::from_json(const nlohmann::json& j) {
  Trial t;
  t.params = j.at("params");
  const auto status = j.at("status").get<std::string>();
  if (status == "ok") {
    t.status = TrialStatus::ok;
    t.loss = j.at("loss").get<double>();
  } else if (status == "failed") {
    t.status = TrialStatus::failed;
  } else {
    throw DataError("unknown trial status '" + status + "'");
  }
  t.duration_ms = j.value("duration_ms", 0.0);
  t.error = j.value("error", std::string());
  return t;
}

std::size_t TrialHistory::ok_count() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const Trial& t) { return t.status == TrialStatus::ok; }));
}

std::optional<Trial> TrialHistory::best() const {
  std::optional<Trial> out;
  for (const auto& t : trials) {
    if (t.status == TrialStatus::ok && (!out || t.loss < out->loss)) out = t;
  }
  return out;
}

std::vector<double> TrialHistory::best_so_far() const {
  std::vector<double> out;
  double best = std::numeric_limits<double>::quiet_NaN();
  for (const auto& t : trials) {
    if (t.status == TrialStatus::ok && (std::isnan(best) || t.loss < best)) best = t.loss;
    out.push_back(best);
  }
  return out;
}

// --- suggestion ---------------------------------------------------------------------

nlohmann::json suggest_random(const SearchSpace& space, std::uint64_t seed, std::size_t index) {
  auto rng = make_rng(seed, {0x5EEDu, index});
  nlohmann::json out = nlohmann::json::object();
  for (const auto& d : space.dims) {
    if (d.kind == Dimension::Kind::choice) {
      out[d.name] = d.choices[uniform_index(rng, d.choices.size())];
    } else if (d.kind == Dimension::Kind::quniform) {
      // Uniform over the grid points a, a+q, ..., <= b.
      const auto steps = static_cast<std::size_t>(std::floor((d.b - d.a) / d.q + 1e-9)) + 1;
      out[d.name] = d.emit(d.a + static_cast<double>(uniform_index(rng, steps)) * d.q);
    } else {
      out[d.name] = d.emit(d.lo() + uniform01(rng) * (d.hi() - d.lo()));
    }
  }
  return out;
}

std::size_t tpe_good_count(std::size_t n_ok, double gamma) {
  const auto n = static_cast<std::size_t>(std::ceil(gamma * static_cast<double>(n_ok)));
  return std::min(n, n_ok);
}

Parzen Parzen::fit(std::vector<double> points, double lo, double hi) {
  Parzen p;
  p.lo = lo;
  p.hi = hi;
  std::sort(points.begin(), points.end());
  const std::size_t n = points.size();
  if (n == 0) return p;
  const double range = hi - lo;
  const double floor_bw = range / static_cast<double>(std::min<std::size_t>(100, n));
  for (std::size_t i = 0; i < n; ++i) {
    const double left = i == 0 ? lo : points[i - 1];
    const double right = i + 1 == n ? hi : points[i + 1];
    const double bw = std::max(points[i] - left, right - points[i]);
    p.mus.push_back(std::clamp(points[i], lo, hi));
    p.sigmas.push_back(std::clamp(bw, floor_bw, range));
  }
  return p;
}

double Parzen::log_pdf(double x) const {
  if (mus.empty()) return -std::log(hi - lo);
  std::vector<double> terms(mus.size());
  for (std::size_t i = 0; i < mus.size(); ++i) {
    const double s = sigmas[i];
    const double z = (x - mus[i]) / s;
    const double mass = normal_cdf((hi - mus[i]) / s) - normal_cdf((lo - mus[i]) / s);
    terms[i] = -0.5 * z * z - kLogSqrt2Pi - std::log(s) - std::log(mass);
  }
  return log_sum_exp(terms) - std::log(static_cast<double>(mus.size()));
}

double Parzen::sample(Rng& rng) const {
  if (mus.empty()) return lo + uniform01(rng) * (hi - lo);
  const std::size_t i = uniform_index(rng, mus.size());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const double x = mus[i] + sigmas[i] * standard_normal(rng);
    if (x >= lo && x <= hi) return x;
  }
  return mus[i];
}

namespace {

/// Add-one smoothed category probabilities.
std::vector<double> categorical(const std::vector<int>& picks, std::size_t k) {
  std::vector<double> p(k, 1.0);
  for (int c : picks) p[static_cast<std::size_t>(c)] += 1.0;
  const double total = static_cast<double>(picks.size() + k);
  for (auto& v : p) v /= total;
  return p;
}

std::size_t sample_categorical(const std::vector<double>& p, Rng& rng) {
  double u = uniform01(rng);
  for (std::size_t i = 0; i + 1 < p.size(); ++i) {
    if (u < p[i]) return i;
    u -= p[i];
  }
  return p.size() - 1;
}

}  // namespace

nlohmann::json suggest_tpe(const SearchSpace& space, const TrialHistory& history, const TpeConfig& config) {
  if (!(config.gamma > 0.0 && config.gamma <= 1.0)) throw ConfigError("tpe: gamma must lie in (0,1]");
  if (config.n_candidates < 1) throw ConfigError("tpe: n_candidates must be >= 1");

  std::vector<std::size_t> ok;
  for (std::size_t i = 0; i < history.trials.size(); ++i) {
    if (history.trials[i].status == TrialStatus::ok) ok.push_back(i);
  }
  if (ok.empty() || ok.size() < static_cast<std::size_t>(std::max(config.n_startup, 0))) {
    return suggest_random(space, config.seed, history.trials.size());
  }
  std::stable_sort(ok.begin(), ok.end(),
                   [&](std::size_t x, std::size_t y) { return history.trials[x].loss < history.trials[y].loss; });
  const std::size_t n_good = tpe_good_count(ok.size(), config.gamma);

  struct Model {
    Parzen l, g;
    std::vector<double> pl, pg;
  };
  std::vector<Model> models(space.dims.size());
  for (std::size_t k = 0; k < space.dims.size(); ++k) {
    const auto& d = space.dims[k];
    if (d.kind == Dimension::Kind::choice) {
      std::vector<int> good, bad;
      for (std::size_t r = 0; r < ok.size(); ++r) {
        const int c = d.choice_index(history.trials[ok[r]].params.at(d.name));
        if (c < 0) continue;
        (r < n_good ? good : bad).push_back(c);
      }
      models[k].pl = categorical(good, d.choices.size());
      models[k].pg = categorical(bad, d.choices.size());
    } else {
      std::vector<double> good, bad;
      for (std::size_t r = 0; r < ok.size(); ++r) {
        const double x = d.working(history.trials[ok[r]].params.at(d.name));
        (r < n_good ? good : bad).push_back(x);
      }
      models[k].l = Parzen::fit(std::move(good), d.lo(), d.hi());
      models[k].g = Parzen::fit(std::move(bad), d.lo(), d.hi());
    }
  }

  auto rng = make_rng(config.seed, {0x7BEu, history.trials.size()});
  nlohmann::json best;
  double best_score = -std::numeric_limits<double>::infinity();
  for (int c = 0; c < config.n_candidates; ++c) {
    nlohmann::json cand = nlohmann::json::object();
    double score = 0.0;
    for (std::size_t k = 0; k < space.dims.size(); ++k) {
      const auto& d = space.dims[k];
      const auto& m = models[k];
      if (d.kind == Dimension::Kind::choice) {
        const std::size_t i = sample_categorical(m.pl, rng);
        score += std::log(m.pl[i]) - std::log(m.pg[i]);
        cand[d.name] = d.choices[i];
      } else {
        const double x = m.l.sample(rng);
        score += m.l.log_pdf(x) - m.g.log_pdf(x);
        cand[d.name] = d.emit(x);
      }
    }
    if (best.is_null() || score > best_score) {
      best_score = score;
      best = std::move(cand);
    }
  }
  return best;
}

std::string to_string(Algo algo) { return algo == Algo::random ? "random" : "tpe"; }

Algo algo_from_string(const std::string& name) {
  if (name == "random") return Algo::random;
  if (name == "tpe") return Algo::tpe;
  throw ConfigError("unknown search algorithm '" + name + "'");
}

// --- optimisation loop ---------------------------------------------------------------

TrialHistory load_history(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open trial history " + path.string());
  TrialHistory h;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      h.trials.push_back(Trial::from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return h;
}

TrialHistory optimize(const Objective& objective, const SearchSpace& space, const OptimizeOptions& options) {
  space.validate();
  if (options.n_iters < 0) throw ConfigError("optimize: n_iters must be >= 0");
  TrialHistory history;
  history.seed = options.seed;

  std::ofstream log;
  if (options.history_path) {
    if (options.resume && std::filesystem::exists(*options.history_path)) {
      history.trials = load_history(*options.history_path).trials;
      for (std::size_t i = 0; i < history.trials.size(); ++i) {
        if (!space.contains(history.trials[i].params)) {
          throw ConfigError("resumed trial " + std::to_string(i) + " does not fit the search space");
        }
      }
      log.open(*options.history_path, std::ios::app);
    } else {
      log.open(*options.history_path, std::ios::trunc);
    }
    if (!log) throw DataError("cannot write trial history " + options.history_path->string());
  }

  TpeConfig tpe = options.tpe;
  tpe.seed = options.seed;
  while (history.trials.size() < static_cast<std::size_t>(options.n_iters)) {
    Trial t;
    t.params = options.algo == Algo::random ? suggest_random(space, options.seed, history.trials.size())
                                            : suggest_tpe(space, history, tpe);
    const auto start = std::chrono::steady_clock::now();
    try {
      t.loss = objective(t.params);
      if (!std::isfinite(t.loss)) {
        t.status = TrialStatus::failed;
        t.error = "non-finite loss";
      }
    } catch (const std::exception& e) {
      t.status = TrialStatus::failed;
      t.error = e.what();
    }
    if (t.status == TrialStatus::failed) t.loss = 0.0;
    t.duration_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    if (log.is_open()) log << t.to_json().dump() << '\n' << std::flush;
    history.trials.push_back(std::move(t));
  }
  return history;
}

std::vector<Trial> top_k(const TrialHistory& history, std::size_t k) {
  if (history.trials.empty()) throw DataError("top_k: empty history");
  if (k < 1) throw ConfigError("top_k: k must be >= 1");
  std::vector<Trial> ok;
  for (const auto& t : history.trials) {
    if (t.status == TrialStatus::ok) ok.push_back(t);
  }
  std::stable_sort(ok.begin(), ok.end(), [](const Trial& a, const Trial& b) { return a.loss < b.loss; });
  if (ok.size() > k) ok.resize(k);
  return ok;
}

Objective cv_objective(const std::string& family, const TabularDataset& ds, const CvOptions& options,
                       nlohmann::json base_params) {
  if (options.folds == 1 || options.folds < 0) throw ConfigError("cv_objective: folds must be 0 (holdout) or >= 2");
  struct Fold {
    TabularDataset train, valid;
  };
  std::vector<Fold> folds;
  if (options.folds == 0) {
    auto split = train_test_split(ds, 0.2, derive_seed(options.seed, {0xC0u}), true);
    folds.push_back({std::move(split.train), std::move(split.test)});
  } else {
    const auto plan = stratified_kfold(ds, options.folds, derive_seed(options.seed, {0xC1u}));
    for (int f = 0; f < plan.k; ++f) {
      const auto tr = plan.training_indices(f), va = plan.validation_indices(f);
      folds.push_back({ds.subset(tr), ds.subset(va)});
    }
  }
  return [family, folds = std::move(folds), options, base = std::move(base_params)](const nlohmann::json& params) {
    nlohmann::json merged = base;
    for (const auto& [k, v] : params.items()) merged[k] = v;
    std::vector<double> values(folds.size(), 0.0);
    std::vector<std::exception_ptr> errors(folds.size());
    const int n = static_cast<int>(folds.size());
#pragma omp parallel for schedule(dynamic)
    for (int f = 0; f < n; ++f) {
      try {
        const auto& fold = folds[static_cast<std::size_t>(f)];
        auto model = train_learner(family, fold.train, merged, derive_seed(options.seed, {0xF0u, static_cast<std::uint64_t>(f)}));
        const auto scores = model->predict_scores(fold.valid.rows);
        const auto m = metric_set(confusion_at(scores, fold.valid.labels, options.threshold));
        values[static_cast<std::size_t>(f)] = metric_value(m, options.metric).value_or(0.0);
      } catch (...) {
        errors[static_cast<std::size_t>(f)] = std::current_exception();
      }
    }
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    return 1.0 - std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
  };
}

SearchSpace gbt_x_space() {
  return SearchSpace{{
      Dimension::loguniform("learning_rate", 0.01, 0.5),
      Dimension::uniform("gamma", 0.0, 2.0),
      Dimension::quniform("max_depth", 2, 8, 1),
      Dimension::loguniform("lambda", 0.01, 10.0),
      Dimension::uniform("alpha", 0.0, 1.0),
      Dimension::quniform("num_leaves", 4, 64, 1),
      Dimension::uniform("colsample_bytree", 0.5, 1.0),
      Dimension::quniform("n_estimators", 20, 200, 10),
  }};
}

SearchSpace gbt_l_space() {
  return SearchSpace{{
      Dimension::loguniform("learning_rate", 0.01, 0.5),
      Dimension::uniform("alpha", 0.0, 1.0),
      Dimension::uniform("lambda", 0.0, 5.0),
      Dimension::quniform("n_estimators", 20, 200, 10),
      Dimension::uniform("subsample", 0.5, 1.0),
      Dimension::quniform("min_child_samples", 2, 30, 1),
      Dimension::quniform("num_leaves", 4, 64, 1),
  }};
}

SearchSpace preset_space(const std::string& family) {
  if (family == "gbt_x") return gbt_x_space();
  if (family == "gbt_l") return gbt_l_space();
  throw ConfigError("no preset search space for family '" + family + "'");
}

}  // namespace thermoscan::hpo
