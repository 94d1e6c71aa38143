#pragma once

#include "wscd/grid.hpp"

namespace wscd {

// CAM cutoffs. t_high selects reliably changed pixels, t_low reliably
// unchanged ones; scores strictly between the two are treated as uncertain
// and belong to neither localization mask. cam_score is the separate
// threshold that turns a score map into the binary change prediction.
struct ThresholdConfig {
  double t_high = 0.60;
  double t_low = 0.40;
  double cam_score = 0.45;
};

// Throws unless all three values lie in [0,1] and t_low <= t_high.
void validate(const ThresholdConfig& cfg);

// Pixel is 1 iff score >= t_high.
BinaryMask changed_localization(const ScoreMap& c, const ThresholdConfig& cfg);

// Pixel is 1 iff score <= t_low.
BinaryMask unchanged_localization(const ScoreMap& c, const ThresholdConfig& cfg);

// Pixel-supervised variant: the ground-truth mask and its complement.
// The two outputs partition the grid.
struct GroundTruthMasks {
  BinaryMask changed;
  BinaryMask unchanged;
};
GroundTruthMasks masks_from_ground_truth(const BinaryMask& gt);

}  // namespace wscd
