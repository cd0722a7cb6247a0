#include "thermoscan/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "thermoscan/rng.hpp"

namespace thermoscan {
namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
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
    } else {
      cur += c;
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::string trim(std::string s) {
  auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_real(const std::string& text, double& value) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  return ec == std::errc() && ptr == last && std::isfinite(value);
}

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

/// Largest-remainder apportionment of `total` across groups proportional to `sizes`.
std::vector<std::size_t> apportion(const std::vector<std::size_t>& sizes, double fraction,
                                   std::size_t total) {
  std::vector<std::size_t> share(sizes.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < sizes.size(); ++c) {
    const double exact = static_cast<double>(sizes[c]) * fraction;
    share[c] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    assigned += share[c];
    remainders.emplace_back(exact - static_cast<double>(share[c]), c);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; assigned < total && i < remainders.size(); ++i) {
    ++share[remainders[i].second];
    ++assigned;
  }
  return share;
}

}  // namespace

void TabularDataset::validate() const {
  if (rows.rows() == 0 || rows.cols() == 0) throw DataError("dataset must have n >= 1 and d >= 1");
  if (feature_names.size() != rows.cols()) throw DataError("feature name count differs from d");
  if (labels.size() != rows.rows()) throw DataError("label count differs from n");
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= label_names.size()) {
      throw DataError("label id " + std::to_string(y) + " has no label name");
    }
  }
  for (double v : rows.data()) {
    if (!std::isfinite(v)) throw DataError("dataset contains a non-finite value");
  }
}

std::vector<std::size_t> TabularDataset::class_counts() const {
  std::vector<std::size_t> counts(label_names.size(), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

std::vector<std::vector<std::size_t>> TabularDataset::indices_by_class() const {
  std::vector<std::vector<std::size_t>> out(label_names.size());
  for (std::size_t i = 0; i < labels.size(); ++i) out.at(static_cast<std::size_t>(labels[i])).push_back(i);
  return out;
}

TabularDataset TabularDataset::subset(std::span<const std::size_t> indices) const {
  TabularDataset out;
  out.feature_names = feature_names;
  out.label_names = label_names;
  out.rows = Matrix(indices.size(), width());
  out.labels.reserve(indices.size());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    auto src = rows.row(indices[r]);
    std::copy(src.begin(), src.end(), out.rows.row(r).begin());
    out.labels.push_back(labels[indices[r]]);
  }
  return out;
}

TabularDataset concat(const TabularDataset& a, const TabularDataset& b) {
  if (a.feature_names != b.feature_names || a.label_names != b.label_names) {
    throw DataError("concat: datasets have different columns or labels");
  }
  TabularDataset out = a;
  for (std::size_t r = 0; r < b.size(); ++r) out.rows.append_row(b.rows.row(r));
  out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
  return out;
}

TabularDataset load_csv(const std::filesystem::path& path, const std::string& label_column,
                        const std::vector<std::string>& ignore_columns) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());

  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + ": missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (!line.empty() && line.back() == '\r') line.pop_back();
  auto header = split_csv_line(line);
  for (auto& h : header) h = trim(h);

  auto label_it = std::find(header.begin(), header.end(), label_column);
  if (label_it == header.end()) {
    throw DataError(path.string() + ": unknown label column '" + label_column + "'");
  }
  const auto label_col = static_cast<std::size_t>(label_it - header.begin());

  TabularDataset ds;
  std::vector<std::size_t> feature_cols;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (c == label_col) continue;
    if (std::find(ignore_columns.begin(), ignore_columns.end(), header[c]) != ignore_columns.end()) continue;
    feature_cols.push_back(c);
    ds.feature_names.push_back(header[c]);
  }

  std::map<std::string, int> label_ids;
  std::vector<double> values;
  std::size_t row_number = 1;
  while (std::getline(in, line)) {
    ++row_number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(path.string() + ": row " + std::to_string(row_number) + " has " +
                      std::to_string(cells.size()) + " cells, expected " +
                      std::to_string(header.size()));
    }
    for (std::size_t c : feature_cols) {
      double v = 0.0;
      if (!parse_real(trim(cells[c]), v)) {
        throw DataError(path.string() + ": unparsable cell at row " + std::to_string(row_number) +
                        ", column " + std::to_string(c + 1) + " ('" + header[c] + "'): '" +
                        cells[c] + "'");
      }
      values.push_back(v);
    }
    const std::string name = trim(cells[label_col]);
    if (name.empty()) {
      throw DataError(path.string() + ": missing label at row " + std::to_string(row_number));
    }
    auto [it, inserted] = label_ids.try_emplace(name, static_cast<int>(ds.label_names.size()));
    if (inserted) ds.label_names.push_back(name);
    ds.labels.push_back(it->second);
  }
  ds.rows = Matrix(ds.labels.size(), feature_cols.size(), std::move(values));
  ds.validate();
  return ds;
}

void save_csv(const std::filesystem::path& path, const TabularDataset& ds,
              const std::string& label_column) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& name : ds.feature_names) out << quote_if_needed(name) << ',';
  out << quote_if_needed(label_column) << '\n';
  for (std::size_t r = 0; r < ds.size(); ++r) {
    for (double v : ds.rows.row(r)) out << format_real(v) << ',';
    out << quote_if_needed(ds.label_names.at(static_cast<std::size_t>(ds.labels[r]))) << '\n';
  }
}

TabularDataset with_positive_label(const TabularDataset& ds, const std::string& positive_name) {
  if (ds.label_names.size() != 2) throw DataError("with_positive_label needs exactly two classes");
  auto it = std::find(ds.label_names.begin(), ds.label_names.end(), positive_name);
  if (it == ds.label_names.end()) throw DataError("unknown label '" + positive_name + "'");
  if (it - ds.label_names.begin() == 1) return ds;
  TabularDataset out = ds;
  std::swap(out.label_names[0], out.label_names[1]);
  for (int& y : out.labels) y = 1 - y;
  return out;
}

Split train_test_split(const TabularDataset& ds, double test_fraction, std::uint64_t seed,
                       bool stratified) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("test_fraction must lie in (0,1)");
  }
  const std::size_t n = ds.size();
  const auto total_test = static_cast<std::size_t>(std::llround(static_cast<double>(n) * test_fraction));

  std::vector<std::vector<std::size_t>> groups;
  if (stratified) {
    groups = ds.indices_by_class();
    std::erase_if(groups, [](const auto& g) { return g.empty(); });
    for (const auto& g : groups) {
      if (g.size() < 2) throw DataError("stratified split needs at least 2 rows per class");
    }
  } else {
    groups.emplace_back(n);
    std::iota(groups[0].begin(), groups[0].end(), 0);
  }
  if (total_test == 0 || total_test >= n) throw DataError("split leaves one side empty");

  std::vector<std::size_t> sizes;
  for (const auto& g : groups) sizes.push_back(g.size());
  auto share = apportion(sizes, test_fraction, total_test);
  if (stratified) {
    for (std::size_t c = 0; c < share.size(); ++c) {
      share[c] = std::clamp<std::size_t>(share[c], 1, sizes[c] - 1);
    }
  }

  Split split;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto members = groups[c];
    auto rng = make_rng(seed, {0x5u, c});
    shuffle(members.begin(), members.end(), rng);
    split.test_indices.insert(split.test_indices.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(share[c]));
    split.train_indices.insert(split.train_indices.end(), members.begin() + static_cast<std::ptrdiff_t>(share[c]), members.end());
  }
  std::sort(split.test_indices.begin(), split.test_indices.end());
  std::sort(split.train_indices.begin(), split.train_indices.end());
  split.train = ds.subset(split.train_indices);
  split.test = ds.subset(split.test_indices);
  return split;
}

std::vector<std::size_t> FoldPlan::validation_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] == fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> FoldPlan::training_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < assignments.size(); ++i) {
    if (assignments[i] != fold) out.push_back(i);
  }
  return out;
}

FoldPlan stratified_kfold(const TabularDataset& ds, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  FoldPlan plan;
  plan.k = k;
  plan.assignments.assign(ds.size(), -1);
  auto groups = ds.indices_by_class();
  // Round-robin continues across classes, so total fold sizes differ by at most one.
  std::size_t next = 0;
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& members = groups[c];
    if (members.empty()) continue;
    if (members.size() < static_cast<std::size_t>(k)) {
      throw DataError("class '" + ds.label_names[c] + "' has " + std::to_string(members.size()) +
                      " rows, fewer than k=" + std::to_string(k));
    }
    auto rng = make_rng(seed, {0xF01Du, c});
    shuffle(members.begin(), members.end(), rng);
    for (std::size_t idx : members) {
      plan.assignments[idx] = static_cast<int>(next % static_cast<std::size_t>(k));
      ++next;
    }
  }
  return plan;
}

EitLabelMode eit_label_mode_from_int(int labels) {
  switch (labels) {
    case 2: return EitLabelMode::two;
    case 3: return EitLabelMode::three;
    case 6: return EitLabelMode::six;
    default: throw ConfigError("EIT label count must be 2, 3 or 6");
  }
}

TabularDataset relabel_eit(const TabularDataset& ds, EitLabelMode mode, bool drop_con_adi) {
  static const std::vector<std::string> known = {"car", "fad", "mas", "gla", "con", "adi"};
  for (const auto& name : ds.label_names) {
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw DataError("relabel_eit: unknown source label '" + name + "'");
    }
  }
  if (mode == EitLabelMode::six) return ds;

  TabularDataset out;
  out.feature_names = ds.feature_names;
  std::map<std::string, int> target;
  if (mode == EitLabelMode::two) {
    out.label_names = {"non-car", "car"};
    target = {{"car", 1}, {"fad", 0}, {"mas", 0}, {"gla", 0}, {"con", 0}, {"adi", 0}};
  } else {
    out.label_names = {"con+adi", "fad+mas+gla", "car"};
    target = {{"car", 2}, {"fad", 1}, {"mas", 1}, {"gla", 1}, {"con", 0}, {"adi", 0}};
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    const auto& name = ds.label_names[static_cast<std::size_t>(ds.labels[i])];
    if (mode == EitLabelMode::two && drop_con_adi && (name == "con" || name == "adi")) continue;
    keep.push_back(i);
  }
  out.rows = Matrix(keep.size(), ds.width());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    auto src = ds.rows.row(keep[r]);
    std::copy(src.begin(), src.end(), out.rows.row(r).begin());
    out.labels.push_back(target.at(ds.label_names[static_cast<std::size_t>(ds.labels[keep[r]])]));
  }
  return out;
}

}  // namespace thermoscan
