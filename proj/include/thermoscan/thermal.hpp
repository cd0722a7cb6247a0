#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "thermoscan/common.hpp"
#include "thermoscan/rng.hpp"

namespace thermoscan {

enum class ImageSource { raw, masked, roi, normalized };

/// Grid of skin temperatures in degrees Celsius (or [0,1] once normalised).
struct Thermogram {
  Matrix matrix;
  std::string patient_id;
  int label = 0;  // 1: cancer
  ImageSource source = ImageSource::raw;

  std::size_t height() const { return matrix.rows(); }
  std::size_t width() const { return matrix.cols(); }
};

/// Binary region-of-interest mask; nonzero cells belong to the breast.
struct MaskImage {
  std::size_t h = 0, w = 0;
  std::vector<std::uint8_t> cells;

  bool at(std::size_t r, std::size_t c) const { return cells[r * w + c] != 0; }
  std::size_t count() const;
};

struct PatientRecord {
  std::string patient_id;
  int label = 0;
  std::vector<Thermogram> thermograms;
  std::optional<MaskImage> mask;
};

/// Whitespace-separated rectangular grid of reals.
Thermogram load_temperature_matrix(const std::filesystem::path& path);
void save_temperature_matrix(const std::filesystem::path& path, const Matrix& m);

/// Plain-text 0/1 grid, or binary PGM (P5) where nonzero pixels are in the mask.
MaskImage load_mask(const std::filesystem::path& path);

/// Zeroes cells outside the mask and crops to the mask's bounding box.
Thermogram mask_and_crop(const Thermogram& t, const MaskImage& m);

/// Corner-aligned bilinear resampling (output corners coincide with input corners).
Thermogram resize_bilinear(const Thermogram& t, std::size_t h, std::size_t w);

struct NormalizeMode {
  enum class Kind { per_image, fixed } kind = Kind::per_image;
  double lo = 0.0;
  double hi = 1.0;

  static NormalizeMode per_image() { return {}; }
  static NormalizeMode fixed(double lo, double hi) { return {Kind::fixed, lo, hi}; }
};

/// Maps to [0,1]. A constant image becomes 0.5 everywhere in per-image mode.
Thermogram normalize(const Thermogram& t, const NormalizeMode& mode);

struct ImageOp {
  enum class Kind { hflip, vflip, rot90, gaussian, salt_pepper } kind = Kind::hflip;
  double param = 0.0;  // gaussian sigma or salt-and-pepper probability

  static ImageOp hflip() { return {Kind::hflip, 0.0}; }
  static ImageOp vflip() { return {Kind::vflip, 0.0}; }
  static ImageOp rot90() { return {Kind::rot90, 0.0}; }
  static ImageOp gaussian(double sigma) { return {Kind::gaussian, sigma}; }
  static ImageOp salt_pepper(double p) { return {Kind::salt_pepper, p}; }

  void validate() const;
  std::string name() const;
};

/// Single operation. Noise ops need a normalised image and clamp to [0,1].
Thermogram apply_op(const Thermogram& t, const ImageOp& op, Rng& rng);

/// Default op set: hflip, vflip, rot90, gaussian(0.01), salt_pepper(0.01).
std::vector<ImageOp> default_image_ops();

/// Keeps every original and adds (degree - 1) synthetic images per original,
/// each from a uniformly drawn op. Image (r, i, copy) draws from its own seed.
std::vector<PatientRecord> augment_images(const std::vector<PatientRecord>& records, const std::vector<ImageOp>& ops,
                                          int degree, std::uint64_t seed);

struct PatientSplit {
  std::vector<PatientRecord> train;
  std::vector<PatientRecord> test;
};

/// Patient-level stratified split; no patient appears on both sides.
PatientSplit patient_split(const std::vector<PatientRecord>& records, double test_fraction, std::uint64_t seed);

/// Reads <root>/<healthy|sick>/<patient_id>/*.txt with an optional mask.txt
/// or mask.pgm per patient. Patients and images are taken in name order.
std::vector<PatientRecord> load_thermal_directory(const std::filesystem::path& root);

/// Writes records in the layout load_thermal_directory reads.
void save_thermal_directory(const std::filesystem::path& root, const std::vector<PatientRecord>& records);

/// Flat binary cache: per image, int32 h and w followed by h*w float32 values,
/// all little-endian.
void write_tensor_cache(const std::filesystem::path& path, const std::vector<Thermogram>& images);
std::vector<Matrix> read_tensor_cache(const std::filesystem::path& path);

}  // namespace thermoscan
