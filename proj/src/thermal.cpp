#include "thermoscan/thermal.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "thermoscan/dataset.hpp"

namespace thermoscan {

namespace fs = std::filesystem;

std::size_t MaskImage::count() const {
  return static_cast<std::size_t>(std::count_if(cells.begin(), cells.end(), [](std::uint8_t c) { return c != 0; }));
}

namespace {

std::vector<std::vector<double>> read_grid(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    std::vector<double> row;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
      if (ec != std::errc() || ptr != tok.data() + tok.size() || !std::isfinite(v)) {
        throw DataError(path.string() + ": line " + std::to_string(lineno) + ": not a number: '" + tok + "'");
      }
      row.push_back(v);
    }
    if (row.empty()) continue;
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw DataError(path.string() + ": line " + std::to_string(lineno) + ": expected " +
                      std::to_string(rows.front().size()) + " values, found " + std::to_string(row.size()));
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError(path.string() + ": empty grid");
  return rows;
}

Matrix to_matrix(const std::vector<std::vector<double>>& rows) {
  Matrix m(rows.size(), rows.front().size());
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < rows[r].size(); ++c) m(r, c) = rows[r][c];
  return m;
}

MaskImage load_pgm(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  auto next_token = [&]() {
    std::string tok;
    char ch;
    while (f.get(ch)) {
      if (ch == '#') {
        std::string skip;
        std::getline(f, skip);
        continue;
      }
      if (std::isspace(static_cast<unsigned char>(ch))) {
        if (!tok.empty()) break;
        continue;
      }
      tok += ch;
    }
    return tok;
  };
  if (next_token() != "P5") throw DataError(path.string() + ": only binary PGM (P5) masks are supported");
  MaskImage m;
  try {
    m.w = std::stoul(next_token());
    m.h = std::stoul(next_token());
    const auto maxval = std::stoul(next_token());
    if (maxval == 0 || maxval > 255) throw DataError(path.string() + ": PGM maxval must be 1..255");
  } catch (const std::invalid_argument&) {
    throw DataError(path.string() + ": malformed PGM header");
  }
  m.cells.resize(m.h * m.w);
  f.read(reinterpret_cast<char*>(m.cells.data()), static_cast<std::streamsize>(m.cells.size()));
  if (static_cast<std::size_t>(f.gcount()) != m.cells.size()) throw DataError(path.string() + ": truncated PGM data");
  for (auto& c : m.cells) c = c != 0 ? 1 : 0;
  return m;
}

}  // namespace

Thermogram load_temperature_matrix(const fs::path& path) {
  Thermogram t;
  t.matrix = to_matrix(read_grid(path));
  return t;
}

void save_temperature_matrix(const fs::path& path, const Matrix& m) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  char buf[32];
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) {
      const auto res = std::to_chars(buf, buf + sizeof buf, m(r, c));
      if (c) f << ' ';
      f.write(buf, res.ptr - buf);
    }
    f << '\n';
  }
}

MaskImage load_mask(const fs::path& path) {
  MaskImage m;
  if (path.extension() == ".pgm") {
    m = load_pgm(path);
  } else {
    const auto rows = read_grid(path);
    m.h = rows.size();
    m.w = rows.front().size();
    for (const auto& r : rows)
      for (double v : r) m.cells.push_back(v != 0.0 ? 1 : 0);
  }
  if (m.count() == 0) throw DataError(path.string() + ": mask has no nonzero cells");
  return m;
}

Thermogram mask_and_crop(const Thermogram& t, const MaskImage& m) {
  if (m.h != t.height() || m.w != t.width()) throw DataError("mask dimensions do not match the thermogram");
  std::size_t r0 = m.h, r1 = 0, c0 = m.w, c1 = 0;
  for (std::size_t r = 0; r < m.h; ++r)
    for (std::size_t c = 0; c < m.w; ++c)
      if (m.at(r, c)) {
        r0 = std::min(r0, r);
        r1 = std::max(r1, r);
        c0 = std::min(c0, c);
        c1 = std::max(c1, c);
      }
  if (r0 == m.h) throw DataError("mask is empty");
  Thermogram out = t;
  out.matrix = Matrix(r1 - r0 + 1, c1 - c0 + 1);
  for (std::size_t r = r0; r <= r1; ++r)
    for (std::size_t c = c0; c <= c1; ++c) out.matrix(r - r0, c - c0) = m.at(r, c) ? t.matrix(r, c) : 0.0;
  out.source = ImageSource::roi;
  return out;
}

Thermogram resize_bilinear(const Thermogram& t, std::size_t h, std::size_t w) {
  if (h < 1 || w < 1) throw ConfigError("resize target must be at least 1x1");
  const std::size_t H = t.height(), W = t.width();
  auto coord = [](std::size_t i, std::size_t out, std::size_t in) {
    if (out == 1) return 0.5 * static_cast<double>(in - 1);
    return static_cast<double>(i) * static_cast<double>(in - 1) / static_cast<double>(out - 1);
  };
  Thermogram out = t;
  out.matrix = Matrix(h, w);
  for (std::size_t r = 0; r < h; ++r) {
    const double y = coord(r, h, H);
    const auto y0 = std::min(static_cast<std::size_t>(std::floor(y)), H - 1);
    const std::size_t y1 = std::min(y0 + 1, H - 1);
    const double fy = y - static_cast<double>(y0);
    for (std::size_t c = 0; c < w; ++c) {
      const double x = coord(c, w, W);
      const auto x0 = std::min(static_cast<std::size_t>(std::floor(x)), W - 1);
      const std::size_t x1 = std::min(x0 + 1, W - 1);
      const double fx = x - static_cast<double>(x0);
      const double top = t.matrix(y0, x0) * (1 - fx) + t.matrix(y0, x1) * fx;
      const double bottom = t.matrix(y1, x0) * (1 - fx) + t.matrix(y1, x1) * fx;
      out.matrix(r, c) = fy == 0.0 ? top : top * (1 - fy) + bottom * fy;
    }
  }
  return out;
}

Thermogram normalize(const Thermogram& t, const NormalizeMode& mode) {
  Thermogram out = t;
  out.source = ImageSource::normalized;
  auto& data = out.matrix.data();
  if (mode.kind == NormalizeMode::Kind::fixed) {
    if (!(mode.lo < mode.hi)) throw ConfigError("fixed normalisation needs lo < hi");
    for (auto& v : data) v = (std::clamp(v, mode.lo, mode.hi) - mode.lo) / (mode.hi - mode.lo);
    return out;
  }
  const auto [mn, mx] = std::minmax_element(data.begin(), data.end());
  const double lo = *mn, hi = *mx;
  for (auto& v : data) v = hi > lo ? (v - lo) / (hi - lo) : 0.5;
  return out;
}

void ImageOp::validate() const {
  if (kind == Kind::gaussian && !(param > 0)) throw ConfigError("gaussian noise needs sigma > 0");
  if (kind == Kind::salt_pepper && !(param > 0 && param < 1)) throw ConfigError("salt_pepper needs p in (0,1)");
}

std::string ImageOp::name() const {
  switch (kind) {
    case Kind::hflip: return "hflip";
    case Kind::vflip: return "vflip";
    case Kind::rot90: return "rot90";
    case Kind::gaussian: return "gaussian";
    case Kind::salt_pepper: return "salt_pepper";
  }
  return "hflip";
}

Thermogram apply_op(const Thermogram& t, const ImageOp& op, Rng& rng) {
  op.validate();
  const std::size_t h = t.height(), w = t.width();
  Thermogram out = t;
  switch (op.kind) {
    case ImageOp::Kind::hflip:
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out.matrix(r, c) = t.matrix(r, w - 1 - c);
      break;
    case ImageOp::Kind::vflip:
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out.matrix(r, c) = t.matrix(h - 1 - r, c);
      break;
    case ImageOp::Kind::rot90:
      // Counter-clockwise quarter turn.
      out.matrix = Matrix(w, h);
      for (std::size_t r = 0; r < h; ++r)
        for (std::size_t c = 0; c < w; ++c) out.matrix(w - 1 - c, r) = t.matrix(r, c);
      break;
    case ImageOp::Kind::gaussian:
    case ImageOp::Kind::salt_pepper:
      if (t.source != ImageSource::normalized) throw ConfigError("noise augmentation needs normalised images");
      for (auto& v : out.matrix.data()) {
        if (op.kind == ImageOp::Kind::gaussian) {
          v = std::clamp(v + op.param * standard_normal(rng), 0.0, 1.0);
        } else if (uniform01(rng) < op.param) {
          v = uniform01(rng) < 0.5 ? 0.0 : 1.0;
        }
      }
      break;
  }
  return out;
}

std::vector<ImageOp> default_image_ops() {
  return {ImageOp::hflip(), ImageOp::vflip(), ImageOp::rot90(), ImageOp::gaussian(0.01), ImageOp::salt_pepper(0.01)};
}

std::vector<PatientRecord> augment_images(const std::vector<PatientRecord>& records, const std::vector<ImageOp>& ops,
                                          int degree, std::uint64_t seed) {
  if (degree < 2) throw ConfigError("image augmentation degree must be >= 2");
  if (ops.empty()) throw ConfigError("image augmentation needs at least one op");
  for (const auto& op : ops) op.validate();
  std::vector<PatientRecord> out = records;
  for (std::size_t r = 0; r < records.size(); ++r) {
    const auto& originals = records[r].thermograms;
    for (int copy = 1; copy < degree; ++copy) {
      for (std::size_t i = 0; i < originals.size(); ++i) {
        auto rng = make_rng(seed, {0x1A6u, r, i, static_cast<std::uint64_t>(copy)});
        const auto& op = ops[uniform_index(rng, ops.size())];
        out[r].thermograms.push_back(apply_op(originals[i], op, rng));
      }
    }
  }
  return out;
}

PatientSplit patient_split(const std::vector<PatientRecord>& records, double test_fraction, std::uint64_t seed) {
  if (records.size() < 2) throw DataError("patient_split: need at least two patients");
  // Reuse the stratified row split on a one-column table of patients.
  TabularDataset patients;
  patients.feature_names = {"index"};
  patients.label_names = {"0", "1"};
  patients.rows = Matrix(records.size(), 1);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].label != 0 && records[i].label != 1) throw DataError("patient_split: labels must be 0/1");
    patients.rows(i, 0) = static_cast<double>(i);
    patients.labels.push_back(records[i].label);
  }
  // Stratification needs two patients per class; tiny cohorts split plainly.
  const auto counts = patients.class_counts();
  const bool stratify = std::all_of(counts.begin(), counts.end(), [](std::size_t c) { return c == 0 || c >= 2; });
  const auto split = train_test_split(patients, test_fraction, seed, stratify);
  PatientSplit out;
  for (auto i : split.train_indices) out.train.push_back(records[i]);
  for (auto i : split.test_indices) out.test.push_back(records[i]);
  return out;
}

std::vector<PatientRecord> load_thermal_directory(const fs::path& root) {
  if (!fs::is_directory(root)) throw DataError("thermal root " + root.string() + " is not a directory");
  std::vector<PatientRecord> out;
  for (const auto& [group, label] : {std::pair<const char*, int>{"healthy", 0}, {"sick", 1}}) {
    const auto dir = root / group;
    if (!fs::is_directory(dir)) continue;
    std::vector<fs::path> patients;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) patients.push_back(e.path());
    std::sort(patients.begin(), patients.end());
    for (const auto& p : patients) {
      PatientRecord rec;
      rec.patient_id = p.filename().string();
      rec.label = label;
      std::vector<fs::path> images;
      for (const auto& e : fs::directory_iterator(p)) {
        const auto name = e.path().filename().string();
        if (name == "mask.txt" || name == "mask.pgm") {
          rec.mask = load_mask(e.path());
        } else if (e.path().extension() == ".txt") {
          images.push_back(e.path());
        }
      }
      std::sort(images.begin(), images.end());
      for (const auto& img : images) {
        auto t = load_temperature_matrix(img);
        t.patient_id = rec.patient_id;
        t.label = label;
        rec.thermograms.push_back(std::move(t));
      }
      if (rec.thermograms.empty()) throw DataError("patient directory " + p.string() + " has no thermograms");
      out.push_back(std::move(rec));
    }
  }
  if (out.empty()) throw DataError("no patients under " + root.string());
  return out;
}

void save_thermal_directory(const fs::path& root, const std::vector<PatientRecord>& records) {
  for (const auto& rec : records) {
    const auto dir = root / (rec.label == 1 ? "sick" : "healthy") / rec.patient_id;
    fs::create_directories(dir);
    for (std::size_t i = 0; i < rec.thermograms.size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "img_%03zu.txt", i);
      save_temperature_matrix(dir / name, rec.thermograms[i].matrix);
    }
    if (rec.mask) {
      Matrix m(rec.mask->h, rec.mask->w);
      for (std::size_t i = 0; i < rec.mask->cells.size(); ++i) m.data()[i] = rec.mask->cells[i];
      save_temperature_matrix(dir / "mask.txt", m);
    }
  }
}

namespace {

void put_u32(std::ofstream& f, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  f.write(reinterpret_cast<const char*>(b), 4);
}

bool get_u32(std::ifstream& f, std::uint32_t& v) {
  unsigned char b[4];
  if (!f.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

}  // namespace

void write_tensor_cache(const fs::path& path, const std::vector<Thermogram>& images) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write " + path.string());
  for (const auto& t : images) {
    put_u32(f, static_cast<std::uint32_t>(t.height()));
    put_u32(f, static_cast<std::uint32_t>(t.width()));
    for (double v : t.matrix.data()) put_u32(f, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  }
}

std::vector<Matrix> read_tensor_cache(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open " + path.string());
  std::vector<Matrix> out;
  std::uint32_t h = 0, w = 0;
  while (get_u32(f, h)) {
    if (!get_u32(f, w)) throw DataError(path.string() + ": truncated header");
    Matrix m(h, w);
    for (auto& v : m.data()) {
      std::uint32_t bits = 0;
      if (!get_u32(f, bits)) throw DataError(path.string() + ": truncated tensor data");
      v = static_cast<double>(std::bit_cast<float>(bits));
    }
    out.push_back(std::move(m));
  }
  return out;
}

}  // namespace thermoscan
