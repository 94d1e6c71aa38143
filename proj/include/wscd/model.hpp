#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include "wscd/cam.hpp"
#include "wscd/grid.hpp"

namespace wscd {

struct ModelConfig {
  int encoder_channels = 8;  // C
  int feature_channels = 8;  // D
};

void validate(const ModelConfig& cfg);

// Trainable tensors of the bi-temporal classifier: a shared two-layer 3x3
// convolutional encoder (3 -> C -> C, ReLU, stride 1, zero padding), a 1x1
// feature head (C -> D, linear) applied to the absolute encoding difference,
// and a global-average-pooled linear classifier (D -> logit).
//
// Convolution weights are laid out [out][ky][kx][in] so the innermost loop
// runs over the input channels of one tap, matching the pixel-major
// activation layout.
struct ModelParams {
  ModelConfig cfg;
  std::vector<double> conv1_w, conv1_b;
  std::vector<double> conv2_w, conv2_b;
  std::vector<double> head_w, head_b;
  std::vector<double> cls_w;
  double cls_b = 0.0;
};

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& params);
ClassifierWeights classifier_weights(const ModelParams& params);

// Flat f64 view in checkpoint order; round-trips through params_from_flat.
std::size_t param_count(const ModelConfig& cfg);
std::vector<double> flatten_params(const ModelParams& params);
ModelParams params_from_flat(const ModelConfig& cfg, std::span<const double> flat);

// One bi-temporal training example: paired [0,1] RGB images, the scene-level
// change label, and (when available) pixel ground truth with per-instance IDs.
struct SceneSample {
  FeatureMap x_t1;
  FeatureMap x_t2;
  int y_cls = 0;
  std::optional<BinaryMask> gt;
  std::optional<InstanceIdMask> gt_instances;
};

struct EncoderTrace {
  std::vector<double> conv1_pre, conv1_act, conv2_pre, conv2_act;
};

// forward() output; the retained activations feed backward().
struct ForwardPass {
  FeatureMap features;  // H×W×D
  double logit = 0.0;
  EncoderTrace t1, t2;
  std::vector<double> diff;    // |e1 - e2|, length H*W*C
  std::vector<double> pooled;  // global average of features, length D
};

// Shared-weight encoding of both images, absolute difference, feature head,
// pooled linear logit. Swapping the two images leaves the result unchanged.
// Throws when the images are smaller than the 3x3 kernel support.
ForwardPass forward(const ModelParams& params, const SceneSample& s);

// Numerically stable sigmoid binary cross-entropy on the scene logit,
// with its derivative with respect to the logit.
struct BceResult {
  double loss = 0.0;
  double dlogit = 0.0;
};
BceResult classification_loss(double logit, int y_cls);

// Exact reverse-mode gradients of dlogit * logit + <dfeatures, features>
// with respect to every parameter. An empty dfeatures span means zero; this
// injection point is how the separation loss reaches the encoder. The
// absolute-difference module uses subgradient 0 where the encodings tie.
ModelParams backward(const ModelParams& params, const SceneSample& s,
                     const ForwardPass& fp, double dlogit,
                     std::span<const double> dfeatures);

// In-place params -= lr * grads. Throws on lr <= 0 or non-finite gradients.
void sgd_step(ModelParams& params, const ModelParams& grads, double lr);

// Flat little-endian f64 dump plus a "<path>.manifest" text sidecar listing
// layer names and shapes.
void save_checkpoint(const ModelParams& params, const std::filesystem::path& path);
ModelParams load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);

}  // namespace wscd
