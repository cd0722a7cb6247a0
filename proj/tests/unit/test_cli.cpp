// Drives the thermoscan executable end to end on small generated inputs.

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/dataset.hpp"
#include "thermoscan/doe.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd = std::string(THERMOSCAN_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Blood-style CSV: label column "Classification" with classes 1 and 2.
fs::path blood_like(const fs::path& dir) {
  auto ds = fixtures::xor_like(60, 4, 8);
  ds.label_names = {"1", "2"};
  thermoscan::save_csv(dir / "blood.csv", ds, "Classification");
  return dir / "blood.csv";
}

fs::path write_config(const fs::path& dir, const nlohmann::json& j) {
  std::ofstream(dir / "config.json") << j.dump(2);
  return dir / "config.json";
}

nlohmann::json small_config(const fs::path& csv, const fs::path& out) {
  return {{"dataset", "blood"},
          {"csv", csv.string()},
          {"recipes", {nlohmann::json::object(), {{"expand", true}, {"augment", true}}}},
          {"roster", {{{"family", "logistic"}}, {{"family", "tree"}, {"params", {{"max_depth", 3}}}}}},
          {"hpo", {{"iters", 3}, {"families", {"gbt_x"}}, {"folds", 2}}},
          {"output_dir", out.string()},
          {"run_id", "r1"}};
}

}  // namespace

TEST_CASE("exit codes for configuration errors") {
  const auto dir = fixtures::temp_dir("cli_codes");
  CHECK(run("optimize --iters 0") == 2);
  CHECK(run("") == 2);
  CHECK(run("frobnicate") == 2);
  const auto cfg = write_config(dir, {{"augmet", 4}});
  CHECK(run("doe --config " + cfg.string()) == 2);
  CHECK(run("report --out " + (dir / "nothing").string()) == 1);
}

TEST_CASE("simulate writes one directory per patient") {
  const auto dir = fixtures::temp_dir("cli_sim");
  REQUIRE(run("simulate --healthy 2 --tumor 2 --seed 3 --out " + dir.string()) == 0);
  std::size_t n = 0;
  for (const auto* g : {"healthy", "sick"})
    for (const auto& e : fs::directory_iterator(dir / g)) n += e.is_directory();
  CHECK(n == 4);
  CHECK(fs::exists(dir / "run_config.json"));
}

TEST_CASE("tabular commands and reproducible DOE") {
  const auto dir = fixtures::temp_dir("cli_tab");
  const auto csv = blood_like(dir);
  const auto cfg = write_config(dir, small_config(csv, dir / "results"));
  const auto run_dir = dir / "results" / "r1";

  CHECK(run("ingest --config " + cfg.string()) == 0);
  CHECK(fs::exists(run_dir / "ingest.json"));
  CHECK(run("eda --config " + cfg.string()) == 0);
  CHECK(fs::exists(run_dir / "pca.csv"));
  CHECK(run("engineer --config " + cfg.string()) == 0);
  CHECK(fs::exists(run_dir / "train.csv"));

  REQUIRE(run("doe --jobs 2 --config " + cfg.string()) == 0);
  auto rows = thermoscan::read_results_csv(run_dir / "phase1.csv");
  CHECK(rows.size() == 4);
  CHECK(fs::exists(run_dir / "curves"));

  // re-run from the echoed config into a fresh directory
  REQUIRE(run("doe --jobs 1 --config " + (run_dir / "run_config.json").string() + " --out " + (dir / "rerun").string()) ==
          0);
  auto again = thermoscan::read_results_csv(dir / "rerun" / "phase1.csv");
  thermoscan::write_results_csv(dir / "a.csv", rows, false);
  thermoscan::write_results_csv(dir / "b.csv", again, false);
  CHECK(slurp(dir / "a.csv") == slurp(dir / "b.csv"));

  CHECK(run("doe --both-modes --config " + cfg.string() + " --out " + (dir / "both").string()) == 0);
  CHECK(thermoscan::read_results_csv(dir / "both" / "phase1.csv").size() == 8);

  REQUIRE(run("optimize --config " + cfg.string()) == 0);
  CHECK(fs::exists(run_dir / "phase2.csv"));
  CHECK(fs::exists(run_dir / "gbt_x_trials.jsonl"));
  CHECK(fs::exists(run_dir / "models" / "gbt_x.model.json"));
  // resume with a larger budget continues the same log
  CHECK(run("optimize --iters 5 --resume " + (run_dir / "gbt_x_trials.jsonl").string() + " --config " + cfg.string()) == 0);
  std::ifstream log(run_dir / "gbt_x_trials.jsonl");
  int lines = 0;
  for (std::string l; std::getline(log, l);) lines += !l.empty();
  CHECK(lines == 5);

  CHECK(run("evaluate --model " + (run_dir / "models" / "gbt_x.model.json").string() + " --test " +
            (run_dir / "test.csv").string() + " --config " + cfg.string()) == 1);  // engineered columns differ
  CHECK(run("evaluate --family logistic --train " + csv.string() + " --test " + csv.string() + " --config " +
            cfg.string()) == 0);
  CHECK(fs::exists(run_dir / "evaluation.csv"));

  CHECK(run("report --config " + cfg.string()) == 0);
  CHECK(slurp(run_dir / "summary.md").find("original") != std::string::npos);
}

TEST_CASE("a failed cell gives exit code 1") {
  const auto dir = fixtures::temp_dir("cli_fail");
  const auto csv = blood_like(dir);
  auto j = small_config(csv, dir / "results");
  j["roster"] = {{{"family", "knn"}, {"params", {{"k", 10000}}}}};
  const auto cfg = write_config(dir, j);
  CHECK(run("doe --config " + cfg.string()) == 1);
  CHECK(fs::exists(dir / "results" / "r1" / "phase1.csv"));
}
