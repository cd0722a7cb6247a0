#include <algorithm>
#include <fstream>
#include <set>

#include "doctest.h"
#include "fixtures.hpp"
#include "thermoscan/thermal.hpp"

using namespace thermoscan;

namespace {

Thermogram img(std::size_t h, std::size_t w, std::uint64_t seed) {
  auto rng = make_rng(seed);
  Thermogram t;
  t.matrix = Matrix(h, w);
  for (auto& v : t.matrix.data()) v = 30 + 5 * uniform01(rng);
  return t;
}

MaskImage mask_from(std::size_t h, std::size_t w, auto pred) {
  MaskImage m{h, w, std::vector<std::uint8_t>(h * w, 0)};
  for (std::size_t r = 0; r < h; ++r)
    for (std::size_t c = 0; c < w; ++c) m.cells[r * w + c] = pred(r, c) ? 1 : 0;
  return m;
}

std::vector<PatientRecord> cohort(int sick, int healthy) {
  std::vector<PatientRecord> out;
  for (int i = 0; i < sick + healthy; ++i) {
    PatientRecord p;
    p.patient_id = "p" + std::to_string(i);
    p.label = i < sick ? 1 : 0;
    for (int k = 0; k < 2; ++k) {
      auto t = img(4, 5, i * 10 + k);
      t.patient_id = p.patient_id;
      t.label = p.label;
      p.thermograms.push_back(t);
    }
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("temperature matrix I/O") {
  const auto dir = fixtures::temp_dir("thermal_io");
  std::ofstream(dir / "a.txt") << "30 31 32\n33 34 35\n";
  auto t = load_temperature_matrix(dir / "a.txt");
  CHECK(t.matrix == Matrix(2, 3, std::vector<double>{30, 31, 32, 33, 34, 35}));
  std::ofstream(dir / "ragged.txt") << "1 2 3\n4 5\n";
  try {
    load_temperature_matrix(dir / "ragged.txt");
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  std::ofstream(dir / "nan.txt") << "1 x\n";
  CHECK_THROWS_AS(load_temperature_matrix(dir / "nan.txt"), DataError);
  auto r = img(3, 4, 1);
  save_temperature_matrix(dir / "rt.txt", r.matrix);
  CHECK(load_temperature_matrix(dir / "rt.txt").matrix == r.matrix);
}

TEST_CASE("mask loading") {
  const auto dir = fixtures::temp_dir("thermal_mask");
  std::ofstream(dir / "m.txt") << "0 1\n1 1\n";
  auto m = load_mask(dir / "m.txt");
  CHECK(m.h == 2);
  CHECK(m.count() == 3);
  {
    std::ofstream pgm(dir / "m.pgm", std::ios::binary);
    pgm << "P5\n# comment\n3 2\n255\n";
    const unsigned char px[6] = {0, 255, 0, 0, 7, 0};
    pgm.write(reinterpret_cast<const char*>(px), 6);
  }
  auto p = load_mask(dir / "m.pgm");
  CHECK(p.w == 3);
  CHECK(p.h == 2);
  CHECK(p.count() == 2);
  CHECK(p.at(1, 1));
  std::ofstream(dir / "empty.txt") << "0 0\n0 0\n";
  CHECK_THROWS_AS(load_mask(dir / "empty.txt"), DataError);
}

TEST_CASE("mask and crop") {
  auto t = img(30, 30, 2);
  auto all = mask_and_crop(t, mask_from(30, 30, [](auto, auto) { return true; }));
  CHECK(all.matrix == t.matrix);
  CHECK(all.source == ImageSource::roi);

  auto box = mask_from(30, 30, [](std::size_t r, std::size_t c) { return r >= 10 && r <= 19 && c >= 5 && c <= 24; });
  auto b = mask_and_crop(t, box);
  CHECK(b.height() == 10);
  CHECK(b.width() == 20);

  auto checker = mask_from(30, 30, [](std::size_t r, std::size_t c) { return (r + c) % 2 == 0; });
  auto ch = mask_and_crop(t, checker);
  CHECK(ch.height() == 30);
  CHECK(ch.width() == 30);
  for (std::size_t r = 0; r < 30; ++r)
    for (std::size_t c = 0; c < 30; ++c) {
      if (!checker.at(r, c)) CHECK(ch.matrix(r, c) == 0.0);
      else CHECK(ch.matrix(r, c) == t.matrix(r, c));
    }
  CHECK_THROWS_AS(mask_and_crop(t, mask_from(3, 3, [](auto, auto) { return true; })), DataError);
}

TEST_CASE("bilinear resize") {
  auto t = img(7, 9, 3);
  auto same = resize_bilinear(t, 7, 9);
  for (std::size_t i = 0; i < t.matrix.data().size(); ++i) CHECK(std::abs(same.matrix.data()[i] - t.matrix.data()[i]) < 1e-12);
  Thermogram c;
  c.matrix = Matrix(3, 3, 31.5);
  const auto flat = resize_bilinear(c, 8, 5);
  for (double v : flat.matrix.data()) CHECK(v == doctest::Approx(31.5));
  Thermogram s;
  s.matrix = Matrix(2, 2, std::vector<double>{0, 1, 1, 2});
  auto up = resize_bilinear(s, 3, 3);
  CHECK(up.matrix(1, 1) == doctest::Approx(1.0));
  CHECK(up.matrix(0, 2) == 1.0);
  CHECK(up.matrix(2, 2) == 2.0);
}

TEST_CASE("normalisation") {
  Thermogram t;
  t.matrix = Matrix(2, 2, std::vector<double>{30, 31, 32, 34});
  auto n = normalize(t, NormalizeMode::per_image());
  CHECK(n.matrix(0, 0) == 0.0);
  CHECK(n.matrix(1, 1) == 1.0);
  CHECK(n.source == ImageSource::normalized);
  Thermogram v;
  v.matrix = Matrix(1, 1, 30.0);
  CHECK(normalize(v, NormalizeMode::fixed(20, 40)).matrix(0, 0) == 0.5);
  Thermogram k;
  k.matrix = Matrix(3, 3, 33.0);
  const auto half = normalize(k, NormalizeMode::per_image());
  for (double x : half.matrix.data()) CHECK(x == 0.5);
  for (std::uint64_t s = 0; s < 20; ++s) {
    auto r = normalize(img(5, 6, s), NormalizeMode::per_image());
    auto [mn, mx] = std::minmax_element(r.matrix.data().begin(), r.matrix.data().end());
    CHECK(std::abs(*mn) < 1e-12);
    CHECK(std::abs(*mx - 1) < 1e-12);
  }
}

TEST_CASE("image ops") {
  auto rng = make_rng(4);
  auto t = img(4, 6, 5);
  for (auto op : {ImageOp::hflip(), ImageOp::vflip()}) {
    auto twice = apply_op(apply_op(t, op, rng), op, rng);
    CHECK(twice.matrix == t.matrix);
  }
  auto r = apply_op(t, ImageOp::rot90(), rng);
  CHECK(r.height() == 6);
  CHECK(r.width() == 4);
  // counter-clockwise: the top-right corner moves to the top-left
  CHECK(r.matrix(0, 0) == t.matrix(0, 5));
  auto r4 = t;
  for (int i = 0; i < 4; ++i) r4 = apply_op(r4, ImageOp::rot90(), rng);
  CHECK(r4.matrix == t.matrix);

  CHECK_THROWS_AS(apply_op(t, ImageOp::gaussian(0.01), rng), ConfigError);
  auto n = normalize(img(100, 100, 6), NormalizeMode::per_image());
  auto g = apply_op(n, ImageOp::gaussian(0.01), rng);
  double maxdev = 0;
  for (std::size_t i = 0; i < g.matrix.data().size(); ++i) {
    const double v = g.matrix.data()[i];
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
    maxdev = std::max(maxdev, std::abs(v - n.matrix.data()[i]));
  }
  CHECK(maxdev < 0.05);
  auto sp = apply_op(n, ImageOp::salt_pepper(0.1), rng);
  int flipped = 0;
  for (double v : sp.matrix.data()) flipped += (v == 0.0 || v == 1.0);
  CHECK(flipped > 800);
  CHECK(flipped < 1200);
  CHECK_THROWS_AS(ImageOp::salt_pepper(1.5).validate(), ConfigError);
}

TEST_CASE("augment_images keeps originals and is seeded") {
  auto recs = cohort(2, 2);
  for (auto& r : recs)
    for (auto& t : r.thermograms) t = normalize(t, NormalizeMode::per_image());
  auto a = augment_images(recs, default_image_ops(), 3, 11);
  auto b = augment_images(recs, default_image_ops(), 3, 11);
  for (std::size_t r = 0; r < recs.size(); ++r) {
    REQUIRE(a[r].thermograms.size() == 6);
    CHECK(a[r].thermograms[0].matrix == recs[r].thermograms[0].matrix);
    for (std::size_t i = 0; i < 6; ++i) CHECK(a[r].thermograms[i].matrix == b[r].thermograms[i].matrix);
  }
}

TEST_CASE("patient split") {
  auto recs = cohort(37, 19);
  auto s = patient_split(recs, 0.3, 3);
  CHECK(s.test.size() == 17);
  int healthy = 0;
  for (const auto& p : s.test) healthy += p.label == 0;
  CHECK(healthy >= 5);
  std::set<std::string> tr, te;
  for (const auto& p : s.train) tr.insert(p.patient_id);
  for (const auto& p : s.test) te.insert(p.patient_id);
  for (const auto& id : te) CHECK(tr.count(id) == 0);
  CHECK(tr.size() + te.size() == 56);
  auto again = patient_split(recs, 0.3, 3);
  for (std::size_t i = 0; i < s.test.size(); ++i) CHECK(again.test[i].patient_id == s.test[i].patient_id);

  auto two = patient_split(cohort(1, 1), 0.5, 1);
  CHECK(two.train.size() == 1);
  CHECK(two.test.size() == 1);
}

TEST_CASE("directory layout and tensor cache round trip") {
  const auto dir = fixtures::temp_dir("thermal_dir");
  auto recs = cohort(2, 1);
  recs[0].mask = mask_from(4, 5, [](std::size_t r, std::size_t) { return r > 0; });
  save_thermal_directory(dir, recs);
  auto back = load_thermal_directory(dir);
  REQUIRE(back.size() == 3);
  std::size_t with_mask = 0;
  for (const auto& p : back) {
    with_mask += p.mask.has_value();
    auto it = std::find_if(recs.begin(), recs.end(), [&](const auto& r) { return r.patient_id == p.patient_id; });
    REQUIRE(it != recs.end());
    CHECK(p.label == it->label);
    REQUIRE(p.thermograms.size() == 2);
    for (std::size_t k = 0; k < 2; ++k)
      for (std::size_t i = 0; i < 20; ++i)
        CHECK(p.thermograms[k].matrix.data()[i] == doctest::Approx(it->thermograms[k].matrix.data()[i]).epsilon(1e-12));
  }
  CHECK(with_mask == 1);

  std::vector<Thermogram> imgs{img(2, 3, 1), img(4, 1, 2)};
  write_tensor_cache(dir / "cache.bin", imgs);
  CHECK(std::filesystem::file_size(dir / "cache.bin") == 2 * 8 + (6 + 4) * 4);
  auto cached = read_tensor_cache(dir / "cache.bin");
  REQUIRE(cached.size() == 2);
  CHECK(cached[1].rows() == 4);
  CHECK(cached[0](1, 2) == double(float(imgs[0].matrix(1, 2))));
}
