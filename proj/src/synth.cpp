#include "wscd/synth.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "wscd/rng.hpp"

namespace wscd {

void validate(const SynthConfig& cfg) {
  require_valid(cfg.dims);
  if (cfg.instances_min < 1 || cfg.instances_min > cfg.instances_max) {
    throw std::invalid_argument("instance count range must satisfy 1 <= min <= max");
  }
  if (cfg.radius_min < 1 || cfg.radius_min > cfg.radius_max) {
    throw std::invalid_argument("instance radius range must satisfy 1 <= min <= max");
  }
  if (cfg.min_gap < 1) {
    throw std::invalid_argument("min_gap must be at least 1");
  }
  if (cfg.texture_noise_sd < 0.0) {
    throw std::invalid_argument("texture_noise_sd must be nonnegative");
  }
  if (!(cfg.p_unchanged_scene >= 0.0 && cfg.p_unchanged_scene <= 1.0)) {
    throw std::invalid_argument("p_unchanged_scene must lie in [0,1]");
  }
  if (2 * cfg.radius_max + 1 > std::min(cfg.dims.height, cfg.dims.width)) {
    throw std::invalid_argument("largest instance does not fit in the scene dimensions");
  }
}

namespace {

constexpr double kBrightnessShift = 0.3;
constexpr int kPlacementAttempts = 500;

double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

struct Shape {
  std::vector<std::size_t> pixels;
  double shift = 0.0;
};

// Pixel set of one instance: an axis-aligned rectangle or a Euclidean disc,
// both 8-connected by construction.
std::vector<std::size_t> shape_pixels(Dim2 dims, int cy, int cx, int hy, int hx, bool disc) {
  std::vector<std::size_t> pixels;
  for (int y = cy - hy; y <= cy + hy; ++y) {
    for (int x = cx - hx; x <= cx + hx; ++x) {
      if (disc) {
        const double dy = static_cast<double>(y - cy) / hy;
        const double dx = static_cast<double>(x - cx) / hx;
        if (dy * dy + dx * dx > 1.0) continue;
      }
      pixels.push_back(static_cast<std::size_t>(y) * dims.width + x);
    }
  }
  return pixels;
}

// Marks every cell within Chebyshev distance < min_gap of the shape, so a
// later shape overlapping a marked cell would violate the gap.
void block_around(Dim2 dims, const std::vector<std::size_t>& pixels, int min_gap,
                  std::vector<std::uint8_t>& blocked) {
  const int r = min_gap - 1;
  for (std::size_t i : pixels) {
    const int y = static_cast<int>(i) / dims.width;
    const int x = static_cast<int>(i) % dims.width;
    const int y0 = std::max(0, y - r);
    const int y1 = std::min(dims.height - 1, y + r);
    const int x0 = std::max(0, x - r);
    const int x1 = std::min(dims.width - 1, x + r);
    for (int by = y0; by <= y1; ++by) {
      for (int bx = x0; bx <= x1; ++bx) {
        blocked[static_cast<std::size_t>(by) * dims.width + bx] = 1;
      }
    }
  }
}

std::vector<Shape> place_instances(const SynthConfig& cfg, int count, Rng& rng) {
  const Dim2 dims = cfg.dims;
  std::vector<std::uint8_t> blocked(dims.pixel_count(), 0);
  std::vector<Shape> shapes;
  shapes.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const int hy = rng.uniform_int(cfg.radius_min, cfg.radius_max);
      const int hx = rng.uniform_int(cfg.radius_min, cfg.radius_max);
      const bool disc = rng.uniform() < 0.5;
      const int cy = rng.uniform_int(hy, dims.height - 1 - hy);
      const int cx = rng.uniform_int(hx, dims.width - 1 - hx);
      auto pixels = shape_pixels(dims, cy, cx, hy, hx, disc);
      const bool free = std::none_of(pixels.begin(), pixels.end(),
                                     [&blocked](std::size_t i) { return blocked[i] != 0; });
      if (!free) continue;
      block_around(dims, pixels, cfg.min_gap, blocked);
      Shape shape;
      shape.pixels = std::move(pixels);
      shape.shift = rng.uniform() < 0.5 ? kBrightnessShift : -kBrightnessShift;
      shapes.push_back(std::move(shape));
      placed = true;
    }
    if (!placed) {
      throw std::runtime_error(
          "instance placement failed: cannot fit " + std::to_string(count) +
          " shapes with min_gap=" + std::to_string(cfg.min_gap) + " in " +
          std::to_string(dims.height) + "x" + std::to_string(dims.width));
    }
  }
  return shapes;
}

}  // namespace

SceneSample generate_sample(const SynthConfig& cfg, std::uint64_t index) {
  validate(cfg);
  Rng rng(derive_stream(cfg.seed, 0x73616d706c65ull ^ splitmix64(index)));
  const Dim2 dims = cfg.dims;
  const std::size_t n = dims.pixel_count();

  const double base = rng.uniform(0.35, 0.55);
  double tint[3];
  for (double& t : tint) t = rng.uniform(-0.05, 0.05);

  const bool unchanged = rng.uniform() < cfg.p_unchanged_scene;

  std::vector<int> instance_ids(n, 0);
  std::vector<double> shift_of_pixel(n, 0.0);
  int count = 0;
  if (!unchanged) {
    count = rng.uniform_int(cfg.instances_min, cfg.instances_max);
    const auto shapes = place_instances(cfg, count, rng);
    for (std::size_t k = 0; k < shapes.size(); ++k) {
      for (std::size_t i : shapes[k].pixels) {
        instance_ids[i] = static_cast<int>(k) + 1;
        shift_of_pixel[i] = shapes[k].shift;
      }
    }
  }

  std::vector<double> img1(n * 3);
  std::vector<double> img2(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      img1[i * 3 + c] = clamp01(base + tint[c] + rng.normal(0.0, cfg.texture_noise_sd));
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int c = 0; c < 3; ++c) {
      img2[i * 3 + c] =
          clamp01(base + tint[c] + shift_of_pixel[i] + rng.normal(0.0, cfg.texture_noise_sd));
    }
  }

  std::vector<std::uint8_t> gt_bits(n);
  for (std::size_t i = 0; i < n; ++i) gt_bits[i] = instance_ids[i] != 0 ? 1 : 0;

  SceneSample s{FeatureMap(dims, 3, std::move(img1)), FeatureMap(dims, 3, std::move(img2)),
                unchanged ? 0 : 1, BinaryMask(dims, std::move(gt_bits)),
                InstanceIdMask(dims, std::move(instance_ids))};
  return s;
}

SampleSplits generate_split(const SynthConfig& cfg, int n_train, int n_val, int n_test) {
  validate(cfg);
  if (n_train < 1 || n_val < 1 || n_test < 1) {
    throw std::invalid_argument("split sizes must all be at least 1");
  }
  SampleSplits splits;
  std::uint64_t index = 0;
  auto fill = [&](std::vector<SceneSample>& out, int count) {
    out.reserve(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(generate_sample(cfg, index++));
  };
  fill(splits.train, n_train);
  fill(splits.val, n_val);
  fill(splits.test, n_test);
  return splits;
}

}  // namespace wscd
