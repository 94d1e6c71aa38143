#include "wscd/grid.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <string>

#include "binary_io.hpp"

namespace wscd {

void require_valid(Dim2 dims) {
  if (dims.height < 1 || dims.width < 1) {
    throw std::invalid_argument("grid dimensions must be at least 1x1, got " +
                                std::to_string(dims.height) + "x" +
                                std::to_string(dims.width));
  }
}

namespace {

void require_size(Dim2 dims, std::size_t expected, std::size_t actual) {
  require_valid(dims);
  if (expected != actual) {
    throw std::invalid_argument("grid value count " + std::to_string(actual) +
                                " does not match dimensions (" +
                                std::to_string(expected) + " expected)");
  }
}

std::ofstream open_out(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("cannot open for writing: " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path, std::ios::openmode mode) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("cannot open for reading: " + path.string());
  return in;
}

}  // namespace

ScoreMap::ScoreMap(Dim2 dims, std::vector<double> values)
    : dims_(dims), values_(std::move(values)) {
  require_size(dims_, dims_.pixel_count(), values_.size());
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) {
      throw std::invalid_argument("score map value outside [0,1]: " + std::to_string(v));
    }
  }
}

FeatureMap::FeatureMap(Dim2 dims, int channels, std::vector<double> values)
    : dims_(dims), channels_(channels), values_(std::move(values)) {
  if (channels_ < 1) {
    throw std::invalid_argument("feature map needs at least one channel");
  }
  require_size(dims_, dims_.pixel_count() * static_cast<std::size_t>(channels_),
               values_.size());
  for (double v : values_) {
    if (!std::isfinite(v)) {
      throw std::invalid_argument("feature map contains a non-finite value");
    }
  }
}

FeatureMap FeatureMap::zeros(Dim2 dims, int channels) {
  require_valid(dims);
  return FeatureMap(dims, channels,
                    std::vector<double>(dims.pixel_count() * static_cast<std::size_t>(channels), 0.0));
}

std::span<const double> FeatureMap::pixel_features(std::size_t i) const {
  if (i >= dims_.pixel_count()) {
    throw std::out_of_range("pixel index " + std::to_string(i) +
                            " out of range for " + std::to_string(dims_.height) +
                            "x" + std::to_string(dims_.width) + " map");
  }
  return std::span<const double>(values_).subspan(i * static_cast<std::size_t>(channels_),
                                                  static_cast<std::size_t>(channels_));
}

BinaryMask::BinaryMask(Dim2 dims, std::vector<std::uint8_t> bits)
    : dims_(dims), bits_(std::move(bits)) {
  require_size(dims_, dims_.pixel_count(), bits_.size());
  for (std::uint8_t b : bits_) {
    if (b > 1) throw std::invalid_argument("binary mask value must be 0 or 1");
  }
}

BinaryMask BinaryMask::zeros(Dim2 dims) {
  require_valid(dims);
  return BinaryMask(dims, std::vector<std::uint8_t>(dims.pixel_count(), 0));
}

std::size_t BinaryMask::ones_count() const {
  return static_cast<std::size_t>(std::accumulate(bits_.begin(), bits_.end(), std::size_t{0}));
}

BinaryMask mask_and(const BinaryMask& a, const BinaryMask& b) {
  if (!(a.dims() == b.dims())) {
    throw std::invalid_argument("mask_and: dimension mismatch");
  }
  std::vector<std::uint8_t> out(a.dims().pixel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<std::uint8_t>(a.bits()[i] & b.bits()[i]);
  }
  return BinaryMask(a.dims(), std::move(out));
}

InstanceIdMask::InstanceIdMask(Dim2 dims, std::vector<int> ids)
    : dims_(dims), ids_(std::move(ids)) {
  require_size(dims_, dims_.pixel_count(), ids_.size());
  for (int id : ids_) {
    if (id < 0) throw std::invalid_argument("instance id must be nonnegative");
  }
}

InstanceIdMask InstanceIdMask::zeros(Dim2 dims) {
  require_valid(dims);
  return InstanceIdMask(dims, std::vector<int>(dims.pixel_count(), 0));
}

int InstanceIdMask::max_id() const {
  return ids_.empty() ? 0 : *std::max_element(ids_.begin(), ids_.end());
}

// ---- serialization ---------------------------------------------------------

namespace {

void write_pgm_values(Dim2 dims, int maxval, std::span<const int> values,
                      const std::filesystem::path& path) {
  auto out = open_out(path, std::ios::out);
  out << "P2\n" << dims.width << ' ' << dims.height << '\n' << maxval << '\n';
  for (int y = 0; y < dims.height; ++y) {
    for (int x = 0; x < dims.width; ++x) {
      if (x) out << ' ';
      out << values[static_cast<std::size_t>(y) * dims.width + x];
    }
    out << '\n';
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

}  // namespace

void write_pgm(const BinaryMask& mask, const std::filesystem::path& path) {
  std::vector<int> values(mask.bits().begin(), mask.bits().end());
  write_pgm_values(mask.dims(), 1, values, path);
}

void write_pgm(const InstanceIdMask& mask, const std::filesystem::path& path) {
  std::vector<int> values(mask.ids().begin(), mask.ids().end());
  write_pgm_values(mask.dims(), std::max(1, mask.max_id()), values, path);
}

PgmImage read_pgm(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::in);
  std::string token;
  auto next = [&]() -> std::string {
    while (in >> token) {
      if (token[0] == '#') {
        std::string rest;
        std::getline(in, rest);
        continue;
      }
      return token;
    }
    throw std::runtime_error("truncated PGM file: " + path.string());
  };
  if (next() != "P2") throw std::runtime_error("not a P2 PGM file: " + path.string());
  PgmImage img;
  img.dims.width = std::stoi(next());
  img.dims.height = std::stoi(next());
  img.maxval = std::stoi(next());
  require_valid(img.dims);
  img.values.resize(img.dims.pixel_count());
  for (auto& v : img.values) v = std::stoi(next());
  return img;
}

void write_ppm(const FeatureMap& rgb, const std::filesystem::path& path) {
  if (rgb.channels() != 3) {
    throw std::invalid_argument("write_ppm expects a 3-channel map");
  }
  auto out = open_out(path, std::ios::out);
  out << "P3\n" << rgb.dims().width << ' ' << rgb.dims().height << "\n255\n";
  const std::size_t n = rgb.dims().pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(rgb.at(i, c), 0.0, 1.0);
      out << static_cast<int>(std::lround(v * 255.0));
      out << (c == 2 ? '\n' : ' ');
    }
  }
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

void write_feature_file(const FeatureMap& f, const std::filesystem::path& path) {
  auto out = open_out(path, std::ios::binary);
  detail::put_u32_le(out, static_cast<std::uint32_t>(f.dims().height));
  detail::put_u32_le(out, static_cast<std::uint32_t>(f.dims().width));
  detail::put_u32_le(out, static_cast<std::uint32_t>(f.channels()));
  detail::put_u32_le(out, 0);
  for (double v : f.values()) detail::put_f64_le(out, v);
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

FeatureMap read_feature_file(const std::filesystem::path& path) {
  auto in = open_in(path, std::ios::binary);
  Dim2 dims;
  dims.height = static_cast<int>(detail::get_u32_le(in));
  dims.width = static_cast<int>(detail::get_u32_le(in));
  const int channels = static_cast<int>(detail::get_u32_le(in));
  detail::get_u32_le(in);  // reserved
  require_valid(dims);
  std::vector<double> values(dims.pixel_count() * static_cast<std::size_t>(channels));
  for (auto& v : values) v = detail::get_f64_le(in);
  return FeatureMap(dims, channels, std::move(values));
}

}  // namespace wscd
