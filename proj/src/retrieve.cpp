#include "wscd/retrieve.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace wscd {

InstanceTable::InstanceTable(std::vector<std::vector<std::size_t>> instances)
    : instances_(std::move(instances)) {
  for (const auto& pixels : instances_) {
    if (pixels.empty()) {
      throw std::invalid_argument("instance table entry with no pixels");
    }
  }
}

std::span<const std::size_t> InstanceTable::pixels(int k) const {
  if (k < 1 || k > count()) {
    throw std::out_of_range("instance id " + std::to_string(k) +
                            " out of range, table holds " + std::to_string(count()));
  }
  return instances_[static_cast<std::size_t>(k - 1)];
}

std::size_t InstanceTable::total_pixels() const {
  std::size_t total = 0;
  for (const auto& pixels : instances_) total += pixels.size();
  return total;
}

namespace {

// Union-find over provisional labels. Roots are label values themselves;
// unions keep the smaller label as the surviving root.
class LabelMerger {
 public:
  int new_label() {
    parent_.push_back(static_cast<int>(parent_.size()));
    return static_cast<int>(parent_.size()) - 1;
  }

  int find(int a) {
    while (parent_[a] != a) {
      parent_[a] = parent_[parent_[a]];
      a = parent_[a];
    }
    return a;
  }

  void merge(int a, int b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent_[b] = a;
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

ConnectivityResult connectivity_search(const BinaryMask& changed_mask) {
  const Dim2 dims = changed_mask.dims();
  const int h = dims.height;
  const int w = dims.width;
  std::vector<int> provisional(dims.pixel_count(), 0);
  LabelMerger merger;
  merger.new_label();  // label 0 stays background

  // First pass: raster scan; only the already-visited half of the
  // 8-neighborhood (W, NW, N, NE) can carry labels.
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const std::size_t i = static_cast<std::size_t>(y) * w + x;
      if (!changed_mask.bit(i)) continue;

      int found = 0;
      auto consider = [&](int ny, int nx) {
        if (ny < 0 || nx < 0 || nx >= w) return;
        const int lbl = provisional[static_cast<std::size_t>(ny) * w + nx];
        if (lbl == 0) return;
        if (found == 0) {
          found = lbl;
        } else {
          merger.merge(found, lbl);
        }
      };
      consider(y, x - 1);
      consider(y - 1, x - 1);
      consider(y - 1, x);
      consider(y - 1, x + 1);

      provisional[i] = found != 0 ? merger.find(found) : merger.new_label();
    }
  }

  // Second pass: resolve to roots and hand out canonical IDs in order of
  // first appearance.
  std::vector<int> canonical_of_root;
  std::vector<int> ids(dims.pixel_count(), 0);
  std::vector<std::vector<std::size_t>> instances;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (provisional[i] == 0) continue;
    const int root = merger.find(provisional[i]);
    if (static_cast<std::size_t>(root) >= canonical_of_root.size()) {
      canonical_of_root.resize(static_cast<std::size_t>(root) + 1, 0);
    }
    int& canon = canonical_of_root[static_cast<std::size_t>(root)];
    if (canon == 0) {
      instances.emplace_back();
      canon = static_cast<int>(instances.size());
    }
    ids[i] = canon;
    instances[static_cast<std::size_t>(canon - 1)].push_back(i);
  }

  return ConnectivityResult{InstanceIdMask(dims, std::move(ids)),
                            InstanceTable(std::move(instances))};
}

FeatureMap extract_instance_features(const FeatureMap& f,
                                     const InstanceIdMask& id_mask, int k) {
  if (!(f.dims() == id_mask.dims())) {
    throw std::invalid_argument("extract_instance_features: dimension mismatch");
  }
  const int max_id = id_mask.max_id();
  if (k < 1 || k > max_id) {
    throw std::out_of_range("instance id " + std::to_string(k) +
                            " out of range, mask holds " + std::to_string(max_id));
  }
  const std::size_t n = f.dims().pixel_count();
  const std::size_t d = static_cast<std::size_t>(f.channels());
  std::vector<double> values(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (id_mask.id(i) != k) continue;
    const auto src = f.pixel_features(i);
    std::copy(src.begin(), src.end(), values.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return FeatureMap(f.dims(), f.channels(), std::move(values));
}

FeatureMap extract_background_features(const FeatureMap& f, const BinaryMask& background) {
  if (!(f.dims() == background.dims())) {
    throw std::invalid_argument("extract_background_features: dimension mismatch");
  }
  const std::size_t n = f.dims().pixel_count();
  const std::size_t d = static_cast<std::size_t>(f.channels());
  std::vector<double> values(n * d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (!background.bit(i)) continue;
    const auto src = f.pixel_features(i);
    std::copy(src.begin(), src.end(), values.begin() + static_cast<std::ptrdiff_t>(i * d));
  }
  return FeatureMap(f.dims(), f.channels(), std::move(values));
}

}  // namespace wscd
