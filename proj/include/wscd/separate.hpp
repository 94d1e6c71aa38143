#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "wscd/grid.hpp"
#include "wscd/retrieve.hpp"

namespace wscd {

// Which pixel groups contribute to the separation loss: changed instances in
// changed scenes (CC), plus the unchanged background of changed scenes (CU),
// plus entire unchanged scenes (UU).
enum class SamplingScope { cc, cc_cu, cc_cu_uu };

std::string to_string(SamplingScope scope);
std::optional<SamplingScope> parse_scope(std::string_view text);  // "CC" / "CC+CU" / "CC+CU+UU"

struct SeparationConfig {
  double alpha = 0.1;
  SamplingScope scope = SamplingScope::cc_cu_uu;
  int warmup_iterations = 200;
};

void validate(const SeparationConfig& cfg);

// Group centroids: arithmetic means of the member pixels' feature vectors.
struct InstanceStats {
  std::vector<std::vector<double>> changed_centroid;  // [k-1] -> D-vector
  std::vector<std::size_t> changed_count;
  std::vector<double> background_centroid;  // empty when background_count == 0
  std::size_t background_count = 0;
  std::vector<double> image_centroid;  // global mean, always present
};

InstanceStats compute_instance_stats(const FeatureMap& f, const InstanceTable* instances,
                                     const BinaryMask* background);

// One loss branch: the scalar value and its gradient with respect to the
// feature map (zero outside the branch's member pixels).
struct BranchResult {
  double loss = 0.0;
  FeatureMap grad;
};

// Sum over instances k of the mean squared distance of member pixels to the
// instance centroid; gradient at a member pixel of instance k is
// (2/N_k) * (f_i - centroid_k). The per-instance means are summed, not
// re-averaged, so every instance contributes equally regardless of size.
BranchResult changed_branch(const FeatureMap& f, const InstanceTable& instances,
                            const InstanceIdMask& id_mask);

// Mean squared distance of background pixels to the background centroid.
// An empty mask is a defined degenerate case: zero loss, zero gradient.
BranchResult background_branch(const FeatureMap& f, const BinaryMask& background);

// Mean squared distance of all pixels to the global feature centroid.
BranchResult unchanged_image_branch(const FeatureMap& f);

struct LossBreakdown {
  double l_pc = 0.0;
  double l_puc = 0.0;
  double l_pu = 0.0;
  double l_sep = 0.0;
  FeatureMap grad;
};

// Everything the separation loss needs for one sample. Changed-labeled
// samples must provide the instance table, ID mask and background mask;
// unchanged-labeled samples only the feature map.
struct SampleLossInputs {
  const FeatureMap* features = nullptr;
  bool changed_label = false;
  const InstanceTable* instances = nullptr;
  const InstanceIdMask* id_mask = nullptr;
  const BinaryMask* background = nullptr;
};

// Combines the branches under the configured scope. The changed and
// background branches apply to changed-labeled samples, the whole-image
// branch to unchanged-labeled ones; disabled or inapplicable branches
// contribute exactly zero. l_sep is the sum of the enabled branches and grad
// the sum of their gradients.
LossBreakdown separation_loss(const SampleLossInputs& inputs, const SeparationConfig& cfg);

// Total objective: cls_loss + alpha * l_sep once iteration has reached
// warmup_iterations, plain cls_loss before that. Throws on negative alpha.
double total_loss(double cls_loss, const LossBreakdown& breakdown,
                  const SeparationConfig& cfg, int iteration);

// Same gating on precomputed scalars; used by the training loop for batch
// summaries.
double total_loss_value(double cls_loss, double l_sep, const SeparationConfig& cfg,
                        int iteration);

}  // namespace wscd
