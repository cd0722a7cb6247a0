#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/dataset.hpp"

using namespace thermoscan;

namespace {

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

TabularDataset eit_like() {
  // 6 tissue classes in the EIT label vocabulary, 5 rows each.
  TabularDataset ds;
  ds.feature_names = {"a"};
  ds.label_names = {"car", "fad", "mas", "gla", "con", "adi"};
  for (int k = 0; k < 6; ++k) {
    for (int r = 0; r < 5; ++r) {
      const double v = k * 10 + r;
      ds.rows.append_row(std::vector<double>{v});
      ds.labels.push_back(k);
    }
  }
  return ds;
}

}  // namespace

TEST_CASE("load_csv parses header, features and first-appearance labels") {
  const auto dir = fixtures::temp_dir("dataset_load");
  write(dir / "t.csv", "a,b,y\n1,2,pos\n3,4.5,neg\n-1,0,pos\n");
  auto ds = load_csv(dir / "t.csv", "y");
  CHECK(ds.size() == 3);
  CHECK(ds.width() == 2);
  CHECK(ds.label_names == std::vector<std::string>{"pos", "neg"});
  CHECK(ds.labels == std::vector<int>{0, 1, 0});
  CHECK(ds.rows(1, 1) == 4.5);

  write(dir / "ign.csv", "id,a,y\n7,1,x\n8,2,z\n");
  auto ig = load_csv(dir / "ign.csv", "y", {"id"});
  CHECK(ig.feature_names == std::vector<std::string>{"a"});

  write(dir / "missing.csv", "a,b,y\n1,,pos\n");
  CHECK_THROWS_AS(load_csv(dir / "missing.csv", "y"), DataError);
  write(dir / "ragged.csv", "a,b,y\n1,2\n");
  CHECK_THROWS_AS(load_csv(dir / "ragged.csv", "y"), DataError);
  CHECK_THROWS_AS(load_csv(dir / "t.csv", "nope"), DataError);
  CHECK_THROWS_AS(load_csv(dir / "absent.csv", "y"), DataError);
}

TEST_CASE("save_csv then load_csv round trips bit for bit") {
  const auto dir = fixtures::temp_dir("dataset_roundtrip");
  auto ds = fixtures::blobs(37, 4, 1.0, 3);
  ds.rows(0, 0) = 1.0 / 3.0;
  ds.rows(1, 1) = -1e-300;
  save_csv(dir / "rt.csv", ds, "label");
  auto back = load_csv(dir / "rt.csv", "label");
  CHECK(back.feature_names == ds.feature_names);
  CHECK(back.rows == ds.rows);
  // labels are re-encoded by first appearance; names must still match per row
  for (std::size_t i = 0; i < ds.size(); ++i) {
    CHECK(back.label_names[back.labels[i]] == ds.label_names[ds.labels[i]]);
  }
}

TEST_CASE("with_positive_label puts the named class at id 1") {
  auto ds = fixtures::blobs(6, 1, 0.0, 1);
  auto flipped = with_positive_label(ds, "neg");
  CHECK(flipped.label_names == std::vector<std::string>{"pos", "neg"});
  for (std::size_t i = 0; i < ds.size(); ++i) CHECK(flipped.labels[i] == 1 - ds.labels[i]);
  CHECK(with_positive_label(ds, "pos").labels == ds.labels);
  CHECK_THROWS(with_positive_label(ds, "other"));
}

TEST_CASE("stratified split sizes") {
  auto ds = fixtures::blobs(10, 2, 1.0, 2);
  auto s = train_test_split(ds, 0.3, 7);
  CHECK(s.test.size() == 3);
  auto counts = s.test.class_counts();
  CHECK(counts[0] >= 1);
  CHECK(counts[1] >= 1);

  auto again = train_test_split(ds, 0.3, 7);
  CHECK(again.test_indices == s.test_indices);
  CHECK(again.train_indices == s.train_indices);

  // Blood-sized set: 116 rows, 64/52 classes
  TabularDataset blood;
  blood.feature_names = {"x"};
  blood.label_names = {"a", "b"};
  for (int i = 0; i < 116; ++i) {
    blood.rows.append_row(std::vector<double>{double(i)});
    blood.labels.push_back(i < 64 ? 0 : 1);
  }
  auto bs = train_test_split(blood, 0.3, 1);
  CHECK(bs.test.size() == 35);
}

TEST_CASE("split partitions the rows") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto ds = fixtures::blobs(23 + seed, 2, 0.5, seed);
    for (bool strat : {true, false}) {
      auto s = train_test_split(ds, 0.25, seed, strat);
      std::vector<std::size_t> all = s.train_indices;
      all.insert(all.end(), s.test_indices.begin(), s.test_indices.end());
      std::sort(all.begin(), all.end());
      REQUIRE(all.size() == ds.size());
      for (std::size_t i = 0; i < all.size(); ++i) REQUIRE(all[i] == i);
      CHECK(s.train == ds.subset(s.train_indices));
      CHECK(s.test == ds.subset(s.test_indices));
    }
  }
}

TEST_CASE("stratified k-fold") {
  TabularDataset ds;
  ds.feature_names = {"x"};
  ds.label_names = {"a", "b", "c"};
  for (int i = 0; i < 9; ++i) {
    ds.rows.append_row(std::vector<double>{double(i)});
    ds.labels.push_back(i % 3);
  }
  auto plan = stratified_kfold(ds, 3, 5);
  for (int f = 0; f < 3; ++f) {
    auto v = plan.validation_indices(f);
    REQUIRE(v.size() == 3);
    std::set<int> classes;
    for (auto i : v) classes.insert(ds.labels[i]);
    CHECK(classes.size() == 3);
    CHECK(plan.training_indices(f).size() == 6);
  }
  CHECK_THROWS(stratified_kfold(ds, 4, 5));

  auto eit = eit_like();
  // 106-row variant: fold sizes 36/35/35
  TabularDataset big;
  big.feature_names = {"x"};
  big.label_names = eit.label_names;
  const int counts[6] = {21, 15, 18, 16, 14, 22};
  for (int k = 0; k < 6; ++k)
    for (int r = 0; r < counts[k]; ++r) {
      big.rows.append_row(std::vector<double>{double(r)});
      big.labels.push_back(k);
    }
  REQUIRE(big.size() == 106);
  auto p = stratified_kfold(big, 3, 1);
  std::vector<std::size_t> sizes;
  std::vector<int> seen(106, 0);
  for (int f = 0; f < 3; ++f) {
    auto v = p.validation_indices(f);
    sizes.push_back(v.size());
    for (auto i : v) ++seen[i];
  }
  std::sort(sizes.begin(), sizes.end());
  CHECK(sizes == std::vector<std::size_t>{35, 35, 36});
  for (int c : seen) CHECK(c == 1);
}

TEST_CASE("EIT relabelling") {
  auto ds = eit_like();
  auto six = relabel_eit(ds, EitLabelMode::six);
  CHECK(six.labels == ds.labels);

  auto two = relabel_eit(ds, EitLabelMode::two);
  CHECK(two.label_names.size() == 2);
  CHECK(two.label_names[1] == "car");
  std::set<int> ids(two.labels.begin(), two.labels.end());
  CHECK(ids.size() == 2);
  CHECK(two.labels[0] == 1);   // car
  CHECK(two.labels[5] == 0);   // fad
  CHECK(two.labels[29] == 0);  // adi
  CHECK(two.class_counts()[1] == 5);

  auto three = relabel_eit(ds, EitLabelMode::three);
  CHECK(three.class_counts() == std::vector<std::size_t>{10, 15, 5});

  auto dropped = relabel_eit(ds, EitLabelMode::two, true);
  CHECK(dropped.size() == 20);
  CHECK(eit_label_mode_from_int(3) == EitLabelMode::three);
  CHECK_THROWS(eit_label_mode_from_int(4));
}

TEST_CASE("concat and validate") {
  auto a = fixtures::blobs(4, 2, 1.0, 1);
  auto b = fixtures::blobs(3, 2, 1.0, 2);
  auto c = concat(a, b);
  CHECK(c.size() == 7);
  CHECK(c.rows(4, 0) == b.rows(0, 0));
  auto bad = a;
  bad.labels.pop_back();
  CHECK_THROWS_AS(bad.validate(), DataError);
}
