#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "wscd/grid.hpp"

namespace wscd {

// Per-instance pixel membership produced by connectivity_search. Instances
// are numbered 1..count(); each pixel list is sorted in raster order and the
// lists are pairwise disjoint.
class InstanceTable {
 public:
  InstanceTable() = default;
  explicit InstanceTable(std::vector<std::vector<std::size_t>> instances);

  int count() const { return static_cast<int>(instances_.size()); }
  std::size_t pixel_count(int k) const { return pixels(k).size(); }
  std::span<const std::size_t> pixels(int k) const;
  std::size_t total_pixels() const;

 private:
  std::vector<std::vector<std::size_t>> instances_;
};

struct ConnectivityResult {
  InstanceIdMask id_mask;
  InstanceTable table;
};

// Sequential raster-scan labeling over the changed localization mask with an
// 8-neighborhood: an isolated foreground pixel opens a new instance, a pixel
// adjacent to exactly one existing instance joins it, and a pixel adjacent to
// several instances merges them. Merging is realized as union-find over
// provisional labels plus a relabeling pass; the surviving provisional label
// is the smallest of the merged set. Final IDs are canonical: 1..K in order
// of first appearance in raster order after all merges resolve, so the result
// is a deterministic function of the mask.
ConnectivityResult connectivity_search(const BinaryMask& changed_mask);

// Full-size copy of f that keeps the feature vectors of pixels whose ID
// equals k and zeroes everything else. k must lie in [1, max id].
FeatureMap extract_instance_features(const FeatureMap& f,
                                     const InstanceIdMask& id_mask, int k);

// Pixel-by-pixel multiplication of f with the background mask: feature
// vectors survive where the mask is 1 and are zeroed elsewhere.
FeatureMap extract_background_features(const FeatureMap& f, const BinaryMask& background);

}  // namespace wscd
