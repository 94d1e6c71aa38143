#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "wscd/localize.hpp"
#include "wscd/model.hpp"
#include "wscd/separate.hpp"
#include "wscd/synth.hpp"

namespace wscd {

// Pixel confusion counts and the derived segmentation metrics for one sample.
// Degenerate cases follow the "empty ground truth, empty prediction is
// perfect" convention so all-unchanged scenes do not poison averages; the raw
// counts stay available for any other convention.
struct MetricRow {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  double precision = 0.0, recall = 0.0, f1 = 0.0, oa = 0.0, iou = 0.0;
  double instance_count_error = 0.0;
  int pred_components = 0;
  int gt_components = 0;
};

MetricRow evaluate(const BinaryMask& pred, const BinaryMask& gt);

// |components(pred) - K_gt| with components found by connectivity_search;
// quantifies merged-instance (lumping) failures.
double instance_count_error(const BinaryMask& pred, const InstanceIdMask& gt_instances);

struct MetricReport {
  double f1 = 0.0, oa = 0.0, iou = 0.0;
  double precision = 0.0, recall = 0.0;
  double instance_count_mae = 0.0;
  std::vector<MetricRow> rows;
};

MetricReport aggregate_metrics(std::vector<MetricRow> rows);

// weak: scene-level labels only; predictions come from the thresholded CAM.
// full: pixel-level supervision; a per-pixel classifier logit replaces the
// scene logit and localization masks come from the ground truth.
enum class Supervision { weak, full };

struct TrainOptions {
  int iterations = 2000;
  int batch_size = 8;
  int eval_interval = 100;
  double learning_rate = 0.15;
  std::uint64_t seed = 1;
  int n_train = 96;
  int n_val = 24;
  int n_test = 48;
  int threads = 0;  // 0 = hardware default
  Supervision supervision = Supervision::weak;
  // Test knob: skips CAM/localization/retrieval/separation entirely. With
  // alpha = 0 the parameter trajectory must match a run that has it on.
  bool run_instance_pipeline = true;
};

void validate(const TrainOptions& opt);

// CSV schema (exact column order):
// iteration,l_cls,l_pc,l_puc,l_pu,l_sep,total,val_f1,val_oa,val_iou,val_inst_mae
// Loss columns are batch means for that iteration; validation columns are
// filled on evaluation iterations (every eval_interval, plus the final one)
// and left empty otherwise. Fixed seeds reproduce the CSV byte-for-byte.
extern const char* const kTrainCsvHeader;

struct TrainResult {
  ModelParams params;
  std::string csv;
  MetricReport final_val;
};

// Per iteration: sample a batch; forward; CAM -> localization masks ->
// connectivity search -> separation loss (gated by warmup and scope);
// classification loss; combined backward; SGD step. Aborts with an error
// naming the iteration if the loss turns non-finite.
TrainResult train(const ModelConfig& model_cfg, const SynthConfig& synth_cfg,
                  const ThresholdConfig& thresholds, const SeparationConfig& separation,
                  const TrainOptions& opt);

// Metrics over a sample set: CAM-score prediction in weak mode, pixel-logit
// prediction in full mode. Every sample must carry ground truth.
MetricReport evaluate_model(const ModelParams& params, std::span<const SceneSample> samples,
                            const ThresholdConfig& thresholds, Supervision supervision,
                            int threads = 0);

enum class AblationAxis { alpha, thresholds, scope };

// Axis values are strings: alpha "0.1", thresholds "0.60:0.40", scope "CC".
// One train+evaluate run per (value, seed); the summary CSV carries one row
// per value with metrics averaged over the shared seeds.
struct AblationRun {
  std::string value;
  std::uint64_t seed = 0;
  double f1 = 0.0, oa = 0.0, iou = 0.0, instance_count_mae = 0.0;
};

struct AblationResult {
  std::string summary_csv;
  std::vector<AblationRun> runs;
};

AblationResult ablation_sweep(AblationAxis axis, std::span<const std::string> values,
                              const ModelConfig& model_cfg, const SynthConfig& synth_cfg,
                              const ThresholdConfig& thresholds,
                              const SeparationConfig& separation, const TrainOptions& base,
                              std::span<const std::uint64_t> seeds);

// "%.12g" formatting shared by every CSV/stdout emitter so identical numbers
// always serialize identically.
std::string fmt_g(double v);

}  // namespace wscd
