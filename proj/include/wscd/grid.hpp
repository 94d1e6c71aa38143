#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace wscd {

// Row-major 2-D extent. Every grid in this project shares the linear pixel
// index i = y * width + x; feature maps pack all channels of a pixel
// contiguously at values[i * channels].
struct Dim2 {
  int height = 0;
  int width = 0;

  std::size_t pixel_count() const {
    return static_cast<std::size_t>(height) * static_cast<std::size_t>(width);
  }
  bool operator==(const Dim2&) const = default;
};

// Throws std::invalid_argument unless height >= 1 and width >= 1.
void require_valid(Dim2 dims);

// Normalized activation grid; every value must lie in [0, 1].
class ScoreMap {
 public:
  ScoreMap(Dim2 dims, std::vector<double> values);

  Dim2 dims() const { return dims_; }
  std::span<const double> values() const { return values_; }
  double at(std::size_t i) const { return values_[i]; }
  double at(int y, int x) const {
    return values_[static_cast<std::size_t>(y) * dims_.width + x];
  }

 private:
  Dim2 dims_;
  std::vector<double> values_;
};

// Dense per-pixel feature grid, pixel-major: values[i * channels + c].
// All values must be finite.
class FeatureMap {
 public:
  FeatureMap(Dim2 dims, int channels, std::vector<double> values);
  static FeatureMap zeros(Dim2 dims, int channels);

  Dim2 dims() const { return dims_; }
  int channels() const { return channels_; }
  std::span<const double> values() const { return values_; }

  // The feature vector of pixel i; throws std::out_of_range on a bad index.
  std::span<const double> pixel_features(std::size_t i) const;

  double at(std::size_t i, int c) const {
    return values_[i * static_cast<std::size_t>(channels_) + c];
  }

 private:
  Dim2 dims_;
  int channels_;
  std::vector<double> values_;
};

// Per-pixel bits, strictly 0 or 1.
class BinaryMask {
 public:
  BinaryMask(Dim2 dims, std::vector<std::uint8_t> bits);
  static BinaryMask zeros(Dim2 dims);

  Dim2 dims() const { return dims_; }
  std::span<const std::uint8_t> bits() const { return bits_; }
  bool bit(std::size_t i) const { return bits_[i] != 0; }
  bool bit(int y, int x) const {
    return bits_[static_cast<std::size_t>(y) * dims_.width + x] != 0;
  }
  std::size_t ones_count() const;

 private:
  Dim2 dims_;
  std::vector<std::uint8_t> bits_;
};

// Elementwise logical AND; dimensions must match.
BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b);

// Per-pixel instance IDs; 0 is background, positive values identify
// instances. Producers (connectivity_search, the scene generator) guarantee
// the canonical form: nonzero IDs are exactly {1..K} and each ID region is
// 8-connected.
class InstanceIdMask {
 public:
  InstanceIdMask(Dim2 dims, std::vector<int> ids);
  static InstanceIdMask zeros(Dim2 dims);

  Dim2 dims() const { return dims_; }
  std::span<const int> ids() const { return ids_; }
  int id(std::size_t i) const { return ids_[i]; }
  int id(int y, int x) const {
    return ids_[static_cast<std::size_t>(y) * dims_.width + x];
  }
  int max_id() const;

 private:
  Dim2 dims_;
  std::vector<int> ids_;
};

// ---- serialization ---------------------------------------------------------

// Plain-text PGM (P2). Masks use maxval 1, instance masks maxval max(1, K).
void write_pgm(const BinaryMask& mask, const std::filesystem::path& path);
void write_pgm(const InstanceIdMask& mask, const std::filesystem::path& path);

struct PgmImage {
  Dim2 dims;
  int maxval = 0;
  std::vector<int> values;
};
PgmImage read_pgm(const std::filesystem::path& path);

// Plain-text PPM (P3) for 3-channel [0,1] images, quantized to 8 bits.
void write_ppm(const FeatureMap& rgb, const std::filesystem::path& path);

// Flat little-endian f64 dump with a 16-byte header of four u32 fields:
// height, width, channels, reserved(0).
void write_feature_file(const FeatureMap& f, const std::filesystem::path& path);
FeatureMap read_feature_file(const std::filesystem::path& path);

}  // namespace wscd
