#include "wscd/separate.hpp"

#include <stdexcept>
#include <string>

namespace wscd {

std::string to_string(SamplingScope scope) {
  switch (scope) {
    case SamplingScope::cc: return "CC";
    case SamplingScope::cc_cu: return "CC+CU";
    case SamplingScope::cc_cu_uu: return "CC+CU+UU";
  }
  throw std::invalid_argument("bad scope value");
}

std::optional<SamplingScope> parse_scope(std::string_view text) {
  if (text == "CC") return SamplingScope::cc;
  if (text == "CC+CU") return SamplingScope::cc_cu;
  if (text == "CC+CU+UU") return SamplingScope::cc_cu_uu;
  return std::nullopt;
}

void validate(const SeparationConfig& cfg) {
  if (cfg.alpha < 0.0) {
    throw std::invalid_argument("separation weight alpha must be nonnegative");
  }
  if (cfg.warmup_iterations < 0) {
    throw std::invalid_argument("warmup_iterations must be nonnegative");
  }
}

namespace {

// Mean feature vector over an explicit pixel list, accumulated as deltas from
// the first member so a zero-variance group yields its value bit-exactly and
// the clustering loss lands on exactly zero.
std::vector<double> centroid_over(const FeatureMap& f, std::span<const std::size_t> pixels) {
  const int d = f.channels();
  const auto ref = f.pixel_features(pixels.front());
  std::vector<double> delta(static_cast<std::size_t>(d), 0.0);
  for (std::size_t i : pixels) {
    const auto p = f.pixel_features(i);
    for (int c = 0; c < d; ++c) delta[static_cast<std::size_t>(c)] += p[c] - ref[c];
  }
  const double inv = 1.0 / static_cast<double>(pixels.size());
  std::vector<double> mean(static_cast<std::size_t>(d));
  for (int c = 0; c < d; ++c) {
    mean[static_cast<std::size_t>(c)] = ref[c] + delta[static_cast<std::size_t>(c)] * inv;
  }
  return mean;
}

// Accumulates one pixel group's mean-squared-distance-to-centroid loss and
// gradient into grad. The gradient of the group mean through the centroid
// cancels (the residuals sum to zero), so the member-pixel gradient is
// simply (2/N) * (f_i - centroid).
double clustering_term(const FeatureMap& f, std::span<const std::size_t> pixels,
                       std::span<const double> centroid, std::vector<double>& grad) {
  const int d = f.channels();
  const double inv_n = 1.0 / static_cast<double>(pixels.size());
  double loss = 0.0;
  for (std::size_t i : pixels) {
    const auto p = f.pixel_features(i);
    double* g = grad.data() + i * static_cast<std::size_t>(d);
    for (int c = 0; c < d; ++c) {
      const double r = p[c] - centroid[static_cast<std::size_t>(c)];
      loss += r * r * inv_n;
      g[c] += 2.0 * inv_n * r;
    }
  }
  return loss;
}

std::vector<std::size_t> mask_pixels(const BinaryMask& mask) {
  std::vector<std::size_t> pixels;
  pixels.reserve(mask.ones_count());
  for (std::size_t i = 0; i < mask.dims().pixel_count(); ++i) {
    if (mask.bit(i)) pixels.push_back(i);
  }
  return pixels;
}

std::vector<std::size_t> all_pixels(const FeatureMap& f) {
  std::vector<std::size_t> pixels(f.dims().pixel_count());
  for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = i;
  return pixels;
}

void require_same_dims(const FeatureMap& f, Dim2 other, const char* what) {
  if (!(f.dims() == other)) {
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
  }
}

void require_table_matches(const InstanceTable& instances, const InstanceIdMask& id_mask) {
  for (int k = 1; k <= instances.count(); ++k) {
    for (std::size_t i : instances.pixels(k)) {
      if (i >= id_mask.dims().pixel_count() || id_mask.id(i) != k) {
        throw std::invalid_argument("instance table disagrees with id mask at instance " +
                                    std::to_string(k));
      }
    }
  }
}

}  // namespace

InstanceStats compute_instance_stats(const FeatureMap& f, const InstanceTable* instances,
                                     const BinaryMask* background) {
  InstanceStats stats;
  if (instances != nullptr) {
    for (int k = 1; k <= instances->count(); ++k) {
      const auto pixels = instances->pixels(k);
      stats.changed_centroid.push_back(centroid_over(f, pixels));
      stats.changed_count.push_back(pixels.size());
    }
  }
  if (background != nullptr) {
    require_same_dims(f, background->dims(), "compute_instance_stats");
    const auto pixels = mask_pixels(*background);
    stats.background_count = pixels.size();
    if (!pixels.empty()) stats.background_centroid = centroid_over(f, pixels);
  }
  stats.image_centroid = centroid_over(f, all_pixels(f));
  return stats;
}

BranchResult changed_branch(const FeatureMap& f, const InstanceTable& instances,
                            const InstanceIdMask& id_mask) {
  require_same_dims(f, id_mask.dims(), "changed_branch");
  require_table_matches(instances, id_mask);
  std::vector<double> grad(f.values().size(), 0.0);
  double loss = 0.0;
  for (int k = 1; k <= instances.count(); ++k) {
    const auto pixels = instances.pixels(k);
    const auto centroid = centroid_over(f, pixels);
    loss += clustering_term(f, pixels, centroid, grad);
  }
  return BranchResult{loss, FeatureMap(f.dims(), f.channels(), std::move(grad))};
}

BranchResult background_branch(const FeatureMap& f, const BinaryMask& background) {
  require_same_dims(f, background.dims(), "background_branch");
  std::vector<double> grad(f.values().size(), 0.0);
  double loss = 0.0;
  const auto pixels = mask_pixels(background);
  if (!pixels.empty()) {
    const auto centroid = centroid_over(f, pixels);
    loss = clustering_term(f, pixels, centroid, grad);
  }
  return BranchResult{loss, FeatureMap(f.dims(), f.channels(), std::move(grad))};
}

BranchResult unchanged_image_branch(const FeatureMap& f) {
  std::vector<double> grad(f.values().size(), 0.0);
  const auto pixels = all_pixels(f);
  const auto centroid = centroid_over(f, pixels);
  const double loss = clustering_term(f, pixels, centroid, grad);
  return BranchResult{loss, FeatureMap(f.dims(), f.channels(), std::move(grad))};
}

LossBreakdown separation_loss(const SampleLossInputs& inputs, const SeparationConfig& cfg) {
  validate(cfg);
  if (inputs.features == nullptr) {
    throw std::invalid_argument("separation_loss: feature map required");
  }
  const FeatureMap& f = *inputs.features;

  std::vector<double> grad(f.values().size(), 0.0);
  auto add_grad = [&grad](const FeatureMap& g) {
    const auto src = g.values();
    for (std::size_t i = 0; i < grad.size(); ++i) grad[i] += src[i];
  };

  LossBreakdown out{0.0, 0.0, 0.0, 0.0, FeatureMap::zeros(f.dims(), f.channels())};
  if (inputs.changed_label) {
    if (inputs.instances == nullptr || inputs.id_mask == nullptr || inputs.background == nullptr) {
      throw std::invalid_argument(
          "separation_loss: changed sample needs instances, id mask and background mask");
    }
    require_same_dims(f, inputs.id_mask->dims(), "separation_loss");
    require_same_dims(f, inputs.background->dims(), "separation_loss");

    auto cc = changed_branch(f, *inputs.instances, *inputs.id_mask);
    out.l_pc = cc.loss;
    add_grad(cc.grad);
    if (cfg.scope != SamplingScope::cc) {
      auto cu = background_branch(f, *inputs.background);
      out.l_puc = cu.loss;
      add_grad(cu.grad);
    }
  } else if (cfg.scope == SamplingScope::cc_cu_uu) {
    auto uu = unchanged_image_branch(f);
    out.l_pu = uu.loss;
    add_grad(uu.grad);
  }

  out.l_sep = out.l_pc + out.l_puc + out.l_pu;
  out.grad = FeatureMap(f.dims(), f.channels(), std::move(grad));
  return out;
}

double total_loss(double cls_loss, const LossBreakdown& breakdown,
                  const SeparationConfig& cfg, int iteration) {
  return total_loss_value(cls_loss, breakdown.l_sep, cfg, iteration);
}

double total_loss_value(double cls_loss, double l_sep, const SeparationConfig& cfg,
                        int iteration) {
  if (cfg.alpha < 0.0) {
    throw std::invalid_argument("separation weight alpha must be nonnegative");
  }
  if (iteration < cfg.warmup_iterations) return cls_loss;
  return cls_loss + cfg.alpha * l_sep;
}

}  // namespace wscd
