#include "wscd/cam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace wscd {

std::vector<double> raw_cam(const FeatureMap& f, const ClassifierWeights& w) {
  const int d = f.channels();
  if (static_cast<std::size_t>(d) != w.w.size()) {
    throw std::invalid_argument("raw_cam: " + std::to_string(w.w.size()) +
                                " weights for " + std::to_string(d) + " channels");
  }
  const std::size_t n = f.dims().pixel_count();
  std::vector<double> out(n);
  const double* values = f.values().data();
  for (std::size_t i = 0; i < n; ++i) {
    double acc = 0.0;
    const double* p = values + i * static_cast<std::size_t>(d);
    for (int c = 0; c < d; ++c) acc += p[c] * w.w[c];
    out[i] = acc > 0.0 ? acc : 0.0;
  }
  return out;
}

ScoreMap normalize_cam(Dim2 dims, std::span<const double> raw) {
  require_valid(dims);
  if (raw.size() != dims.pixel_count()) {
    throw std::invalid_argument("normalize_cam: value count does not match dimensions");
  }
  double max = 0.0;
  for (double v : raw) {
    if (!std::isfinite(v) || v < 0.0) {
      throw std::invalid_argument("normalize_cam: input must be finite and nonnegative");
    }
    max = std::max(max, v);
  }
  std::vector<double> scores(raw.size(), 0.0);
  if (max > 0.0) {
    for (std::size_t i = 0; i < raw.size(); ++i) scores[i] = raw[i] / max;
  }
  return ScoreMap(dims, std::move(scores));
}

ScoreMap cam_from_features(const FeatureMap& f, const ClassifierWeights& w) {
  return normalize_cam(f.dims(), raw_cam(f, w));
}

BinaryMask predict_change(const ScoreMap& c, double cam_score) {
  if (!(cam_score >= 0.0 && cam_score <= 1.0)) {
    throw std::invalid_argument("cam score must lie in [0,1], got " + std::to_string(cam_score));
  }
  std::vector<std::uint8_t> bits(c.dims().pixel_count());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = c.at(i) >= cam_score ? 1 : 0;
  }
  return BinaryMask(c.dims(), std::move(bits));
}

}  // namespace wscd
