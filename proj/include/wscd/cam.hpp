#pragma once

#include <span>
#include <vector>

#include "wscd/grid.hpp"

namespace wscd {

// Weights of the last (global-average-pooled linear) classification layer.
// The same vector that produces the scene logit reweights feature channels
// into the class activation map.
struct ClassifierWeights {
  std::vector<double> w;
};

// Per-pixel ReLU(<features_i, w>); nonnegative, not yet normalized.
// Throws on a channel/weight length mismatch.
std::vector<double> raw_cam(const FeatureMap& f, const ClassifierWeights& w);

// Divides by the global maximum so the output lies in [0,1] with max exactly
// 1, unless the input is all-zero, in which case the output is all-zero
// ("no evidence of change"). Inputs must be finite and nonnegative.
ScoreMap normalize_cam(Dim2 dims, std::span<const double> raw);

// Convenience: normalize_cam(raw_cam(f, w)).
ScoreMap cam_from_features(const FeatureMap& f, const ClassifierWeights& w);

// Binary change prediction: pixel is 1 iff score >= cam_score.
// cam_score must lie in [0,1].
BinaryMask predict_change(const ScoreMap& c, double cam_score);

}  // namespace wscd
