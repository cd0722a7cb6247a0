#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "thermoscan/learners.hpp"

namespace thermoscan {

inline constexpr int kModelFormatVersion = 1;

std::string base64_encode(std::span<const unsigned char> bytes);
std::vector<unsigned char> base64_decode(const std::string& text);

/// Tensor payload: base64 of little-endian IEEE-754 binary32 values.
std::string encode_f32(std::span<const double> values);
std::vector<double> decode_f32(const std::string& text);

/// {"format": "thermoscan-model", "version": 1, "family": ..., "model": {...}}
nlohmann::json model_document(const Classifier& model);
ClassifierPtr model_from_document(const nlohmann::json& doc);

void save_model(const std::filesystem::path& path, const Classifier& model);
ClassifierPtr load_model(const std::filesystem::path& path);

}  // namespace thermoscan
