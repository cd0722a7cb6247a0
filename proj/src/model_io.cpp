#include "thermoscan/model_io.hpp"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "thermoscan/gbt.hpp"
#include "thermoscan/nn.hpp"
#include "thermoscan/tree.hpp"

namespace thermoscan {

namespace {

constexpr char kAlphabet[] = "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";

int decode_char(char c) {
  if (c >= 'A' && c <= 'Z') return c - 'A';
  if (c >= 'a' && c <= 'z') return c - 'a' + 26;
  if (c >= '0' && c <= '9') return c - '0' + 52;
  if (c == '+') return 62;
  if (c == '/') return 63;
  return -1;
}

std::vector<double> f32_field(const nlohmann::json& j, const char* key) {
  return decode_f32(j.at(key).get<std::string>());
}

}  // namespace

std::string base64_encode(std::span<const unsigned char> bytes) {
  std::string out;
  out.reserve((bytes.size() + 2) / 3 * 4);
  std::size_t i = 0;
  for (; i + 2 < bytes.size(); i += 3) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8) | bytes[i + 2];
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += kAlphabet[v & 63];
  }
  const std::size_t rest = bytes.size() - i;
  if (rest == 1) {
    const unsigned v = bytes[i] << 16;
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += "==";
  } else if (rest == 2) {
    const unsigned v = (bytes[i] << 16) | (bytes[i + 1] << 8);
    out += kAlphabet[(v >> 18) & 63];
    out += kAlphabet[(v >> 12) & 63];
    out += kAlphabet[(v >> 6) & 63];
    out += '=';
  }
  return out;
}

std::vector<unsigned char> base64_decode(const std::string& text) {
  if (text.size() % 4 != 0) throw DataError("base64: length is not a multiple of 4");
  std::vector<unsigned char> out;
  out.reserve(text.size() / 4 * 3);
  for (std::size_t i = 0; i < text.size(); i += 4) {
    std::array<int, 4> v{};
    int pad = 0;
    for (int k = 0; k < 4; ++k) {
      const char c = text[i + static_cast<std::size_t>(k)];
      if (c == '=') {
        if (i + 4 != text.size() || k < 2) throw DataError("base64: misplaced padding");
        v[static_cast<std::size_t>(k)] = 0;
        ++pad;
      } else {
        if (pad > 0) throw DataError("base64: data after padding");
        v[static_cast<std::size_t>(k)] = decode_char(c);
        if (v[static_cast<std::size_t>(k)] < 0) throw DataError("base64: invalid character");
      }
    }
    const unsigned triple = (static_cast<unsigned>(v[0]) << 18) | (static_cast<unsigned>(v[1]) << 12) |
                            (static_cast<unsigned>(v[2]) << 6) | static_cast<unsigned>(v[3]);
    out.push_back(static_cast<unsigned char>((triple >> 16) & 0xFF));
    if (pad < 2) out.push_back(static_cast<unsigned char>((triple >> 8) & 0xFF));
    if (pad < 1) out.push_back(static_cast<unsigned char>(triple & 0xFF));
  }
  return out;
}

std::string encode_f32(std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * 4);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
    for (int b = 0; b < 4; ++b) bytes[i * 4 + static_cast<std::size_t>(b)] = static_cast<unsigned char>(bits >> (8 * b));
  }
  return base64_encode(bytes);
}

std::vector<double> decode_f32(const std::string& text) {
  const auto bytes = base64_decode(text);
  if (bytes.size() % 4 != 0) throw DataError("tensor payload is not a whole number of float32 values");
  std::vector<double> out(bytes.size() / 4);
  for (std::size_t i = 0; i < out.size(); ++i) {
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b) bits |= static_cast<std::uint32_t>(bytes[i * 4 + static_cast<std::size_t>(b)]) << (8 * b);
    out[i] = static_cast<double>(std::bit_cast<float>(bits));
  }
  return out;
}

nlohmann::json model_document(const Classifier& model) {
  return {{"format", "thermoscan-model"},
          {"version", kModelFormatVersion},
          {"family", model.family()},
          {"width", model.width()},
          {"model", model.to_json()}};
}

ClassifierPtr model_from_document(const nlohmann::json& doc) {
  try {
    if (doc.value("format", std::string()) != "thermoscan-model") throw DataError("not a thermoscan model document");
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw DataError("unsupported model format version " + std::to_string(version));
    }
    const auto family = doc.at("family").get<std::string>();
    const auto& m = doc.at("model");
    ClassifierPtr out;
    if (family == "linear") {
      out = std::make_unique<LinearRegression>(f32_field(m, "weights"), m.at("bias").get<double>());
    } else if (family == "logistic") {
      out = std::make_unique<LogisticRegression>(f32_field(m, "weights"), m.at("bias").get<double>());
    } else if (family == "knn") {
      const auto rows = m.at("rows").get<std::size_t>(), cols = m.at("cols").get<std::size_t>();
      auto points = f32_field(m, "points");
      if (points.size() != rows * cols) throw DataError("knn: point payload size mismatch");
      out = std::make_unique<KNearestNeighbors>(Matrix(rows, cols, std::move(points)),
                                                m.at("labels").get<std::vector<int>>(), m.at("k").get<int>());
    } else if (family == "svm") {
      out = std::make_unique<LinearSvm>(f32_field(m, "weights"), m.at("bias").get<double>(),
                                        m.at("platt_a").get<double>(), m.at("platt_b").get<double>());
    } else if (family == "tree") {
      out = std::make_unique<DecisionTree>(Tree::from_json(m.at("tree")), m.at("width").get<std::size_t>());
    } else if (family == "forest") {
      std::vector<Tree> trees;
      for (const auto& t : m.at("trees")) trees.push_back(Tree::from_json(t));
      out = std::make_unique<RandomForest>(std::move(trees), m.at("width").get<std::size_t>());
    } else if (family == "gbt") {
      std::vector<Tree> trees;
      for (const auto& t : m.at("trees")) trees.push_back(Tree::from_json(t));
      out = std::make_unique<GradientBoostedTrees>(m.at("base_score").get<double>(), std::move(trees),
                                                   m.at("width").get<std::size_t>());
    } else if (family == "nn") {
      out = std::make_unique<nn::NeuralNet>(nn::NeuralNet::from_json(m));
    } else {
      throw DataError("unknown model family '" + family + "'");
    }
    if (doc.contains("width") && doc["width"].get<std::size_t>() != out->width()) {
      throw DataError("model width does not match its document");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed model document: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Classifier& model) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write model file " + path.string());
  f << model_document(model).dump(1) << '\n';
}

ClassifierPtr load_model(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw DataError("cannot open model file " + path.string());
  nlohmann::json doc;
  try {
    f >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("model file " + path.string() + " is not valid JSON: " + e.what());
  }
  return model_from_document(doc);
}

}  // namespace thermoscan
