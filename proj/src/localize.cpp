#include "wscd/localize.hpp"

#include <stdexcept>
#include <string>

namespace wscd {

void validate(const ThresholdConfig& cfg) {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(cfg.t_high) || !in_unit(cfg.t_low) || !in_unit(cfg.cam_score)) {
    throw std::invalid_argument("thresholds must lie in [0,1]");
  }
  if (cfg.t_low > cfg.t_high) {
    throw std::invalid_argument("t_low (" + std::to_string(cfg.t_low) +
                                ") must not exceed t_high (" +
                                std::to_string(cfg.t_high) + ")");
  }
}

BinaryMask changed_localization(const ScoreMap& c, const ThresholdConfig& cfg) {
  validate(cfg);
  std::vector<std::uint8_t> bits(c.dims().pixel_count());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = c.at(i) >= cfg.t_high ? 1 : 0;
  }
  return BinaryMask(c.dims(), std::move(bits));
}

BinaryMask unchanged_localization(const ScoreMap& c, const ThresholdConfig& cfg) {
  validate(cfg);
  std::vector<std::uint8_t> bits(c.dims().pixel_count());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    bits[i] = c.at(i) <= cfg.t_low ? 1 : 0;
  }
  return BinaryMask(c.dims(), std::move(bits));
}

GroundTruthMasks masks_from_ground_truth(const BinaryMask& gt) {
  std::vector<std::uint8_t> changed(gt.dims().pixel_count());
  std::vector<std::uint8_t> unchanged(gt.dims().pixel_count());
  for (std::size_t i = 0; i < changed.size(); ++i) {
    changed[i] = gt.bits()[i];
    unchanged[i] = static_cast<std::uint8_t>(1 - gt.bits()[i]);
  }
  return GroundTruthMasks{BinaryMask(gt.dims(), std::move(changed)),
                          BinaryMask(gt.dims(), std::move(unchanged))};
}

}  // namespace wscd
