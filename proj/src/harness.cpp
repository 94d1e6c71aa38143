#include "wscd/harness.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

#include "wscd/cam.hpp"
#include "wscd/parallel.hpp"
#include "wscd/retrieve.hpp"
#include "wscd/rng.hpp"

namespace wscd {

std::string fmt_g(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

const char* const kTrainCsvHeader =
    "iteration,l_cls,l_pc,l_puc,l_pu,l_sep,total,val_f1,val_oa,val_iou,val_inst_mae";

MetricRow evaluate(const BinaryMask& pred, const BinaryMask& gt) {
  if (!(pred.dims() == gt.dims())) {
    throw std::invalid_argument("evaluate: dimension mismatch");
  }
  MetricRow row;
  const std::size_t n = pred.dims().pixel_count();
  for (std::size_t i = 0; i < n; ++i) {
    const bool p = pred.bit(i);
    const bool g = gt.bit(i);
    if (p && g) ++row.tp;
    else if (p && !g) ++row.fp;
    else if (!p && g) ++row.fn;
    else ++row.tn;
  }
  const std::size_t pp = row.tp + row.fp;  // predicted positives
  const std::size_t ap = row.tp + row.fn;  // actual positives
  row.precision = pp == 0 ? (ap == 0 ? 1.0 : 0.0)
                          : static_cast<double>(row.tp) / static_cast<double>(pp);
  row.recall = ap == 0 ? (pp == 0 ? 1.0 : 0.0)
                       : static_cast<double>(row.tp) / static_cast<double>(ap);
  row.f1 = row.precision + row.recall == 0.0
               ? 0.0
               : 2.0 * row.precision * row.recall / (row.precision + row.recall);
  row.oa = static_cast<double>(row.tp + row.tn) / static_cast<double>(n);
  const std::size_t uni = row.tp + row.fp + row.fn;
  row.iou = uni == 0 ? 1.0 : static_cast<double>(row.tp) / static_cast<double>(uni);
  return row;
}

double instance_count_error(const BinaryMask& pred, const InstanceIdMask& gt_instances) {
  if (!(pred.dims() == gt_instances.dims())) {
    throw std::invalid_argument("instance_count_error: dimension mismatch");
  }
  const int k_pred = connectivity_search(pred).table.count();
  const int k_gt = gt_instances.max_id();
  return std::abs(static_cast<double>(k_pred) - static_cast<double>(k_gt));
}

MetricReport aggregate_metrics(std::vector<MetricRow> rows) {
  MetricReport report;
  if (rows.empty()) {
    throw std::invalid_argument("aggregate_metrics: no rows");
  }
  for (const MetricRow& r : rows) {
    report.f1 += r.f1;
    report.oa += r.oa;
    report.iou += r.iou;
    report.precision += r.precision;
    report.recall += r.recall;
    report.instance_count_mae += r.instance_count_error;
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  report.f1 *= inv;
  report.oa *= inv;
  report.iou *= inv;
  report.precision *= inv;
  report.recall *= inv;
  report.instance_count_mae *= inv;
  report.rows = std::move(rows);
  return report;
}

void validate(const TrainOptions& opt) {
  if (opt.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (opt.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (opt.eval_interval < 1) throw std::invalid_argument("eval_interval must be >= 1");
  if (!(opt.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (opt.n_train < 1 || opt.n_val < 1 || opt.n_test < 1) {
    throw std::invalid_argument("split sizes must all be >= 1");
  }
  if (opt.threads < 0) throw std::invalid_argument("threads must be >= 0");
}

namespace {

constexpr std::uint64_t kParamStream = 0x706172616d73ull;
constexpr std::uint64_t kBatchStream = 0x62617463686573ull;

void add_params(ModelParams& acc, const ModelParams& g) {
  auto add = [](std::vector<double>& a, const std::vector<double>& b) {
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
  };
  add(acc.conv1_w, g.conv1_w);
  add(acc.conv1_b, g.conv1_b);
  add(acc.conv2_w, g.conv2_w);
  add(acc.conv2_b, g.conv2_b);
  add(acc.head_w, g.head_w);
  add(acc.head_b, g.head_b);
  add(acc.cls_w, g.cls_w);
  acc.cls_b += g.cls_b;
}

// Per-pixel classifier logits used by full supervision: the scene classifier
// applied at every pixel instead of after pooling.
std::vector<double> pixel_logits(const ModelParams& params, const FeatureMap& features) {
  const int d = params.cfg.feature_channels;
  const std::size_t n = features.dims().pixel_count();
  std::vector<double> z(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto f = features.pixel_features(i);
    double acc = params.cls_b;
    for (int c = 0; c < d; ++c) acc += f[c] * params.cls_w[static_cast<std::size_t>(c)];
    z[i] = acc;
  }
  return z;
}

BinaryMask pixel_logit_mask(const ModelParams& params, const FeatureMap& features) {
  const auto z = pixel_logits(params, features);
  std::vector<std::uint8_t> bits(z.size());
  for (std::size_t i = 0; i < z.size(); ++i) bits[i] = z[i] >= 0.0 ? 1 : 0;
  return BinaryMask(features.dims(), std::move(bits));
}

struct SampleWork {
  double l_cls = 0.0, l_pc = 0.0, l_puc = 0.0, l_pu = 0.0, l_sep = 0.0;
  ModelParams grads;
};

LossBreakdown run_separation(const ModelParams& params, const SceneSample& sample,
                             const ForwardPass& fwd, const ThresholdConfig& thresholds,
                             const SeparationConfig& separation, Supervision supervision) {
  if (sample.y_cls == 1) {
    BinaryMask m_c = BinaryMask::zeros(fwd.features.dims());
    BinaryMask m_uc = BinaryMask::zeros(fwd.features.dims());
    if (supervision == Supervision::weak) {
      const ScoreMap cam = cam_from_features(fwd.features, classifier_weights(params));
      m_c = changed_localization(cam, thresholds);
      m_uc = unchanged_localization(cam, thresholds);
    } else {
      auto masks = masks_from_ground_truth(sample.gt.value());
      m_c = std::move(masks.changed);
      m_uc = std::move(masks.unchanged);
    }
    const ConnectivityResult conn = connectivity_search(m_c);
    SampleLossInputs inputs;
    inputs.features = &fwd.features;
    inputs.changed_label = true;
    inputs.instances = &conn.table;
    inputs.id_mask = &conn.id_mask;
    inputs.background = &m_uc;
    return separation_loss(inputs, separation);
  }
  SampleLossInputs inputs;
  inputs.features = &fwd.features;
  inputs.changed_label = false;
  return separation_loss(inputs, separation);
}

SampleWork process_sample(const ModelParams& params, const SceneSample& sample,
                          const ThresholdConfig& thresholds,
                          const SeparationConfig& separation, const TrainOptions& opt,
                          bool apply_separation, double inv_batch) {
  SampleWork work;
  const ForwardPass fwd = forward(params, sample);
  const std::size_t feat_len = fwd.features.values().size();

  std::vector<double> dfeat;
  double dlogit = 0.0;
  std::vector<double> dcls_w;
  double dcls_b = 0.0;

  if (opt.supervision == Supervision::weak) {
    const BceResult bce = classification_loss(fwd.logit, sample.y_cls);
    work.l_cls = bce.loss;
    dlogit = bce.dlogit * inv_batch;
  } else {
    if (!sample.gt.has_value()) {
      throw std::invalid_argument("full supervision requires pixel ground truth");
    }
    const auto z = pixel_logits(params, fwd.features);
    const double inv_hw = 1.0 / static_cast<double>(z.size());
    const int d = params.cfg.feature_channels;
    dfeat.assign(feat_len, 0.0);
    dcls_w.assign(static_cast<std::size_t>(d), 0.0);
    for (std::size_t i = 0; i < z.size(); ++i) {
      const BceResult bce = classification_loss(z[i], sample.gt->bit(i) ? 1 : 0);
      work.l_cls += bce.loss * inv_hw;
      const double dz = bce.dlogit * inv_hw;
      const auto f = fwd.features.pixel_features(i);
      for (int c = 0; c < d; ++c) {
        dfeat[i * static_cast<std::size_t>(d) + c] += dz * params.cls_w[static_cast<std::size_t>(c)];
        dcls_w[static_cast<std::size_t>(c)] += dz * f[c];
      }
      dcls_b += dz;
    }
  }

  if (opt.run_instance_pipeline) {
    const LossBreakdown bd =
        run_separation(params, sample, fwd, thresholds, separation, opt.supervision);
    work.l_pc = bd.l_pc;
    work.l_puc = bd.l_puc;
    work.l_pu = bd.l_pu;
    work.l_sep = bd.l_sep;
    if (apply_separation && separation.alpha > 0.0) {
      if (dfeat.empty()) dfeat.assign(feat_len, 0.0);
      const auto g = bd.grad.values();
      for (std::size_t i = 0; i < feat_len; ++i) dfeat[i] += separation.alpha * g[i];
    }
  }

  if (!dfeat.empty()) {
    for (double& v : dfeat) v *= inv_batch;
  }
  work.grads = backward(params, sample, fwd, dlogit, dfeat);

  if (opt.supervision == Supervision::full) {
    for (std::size_t c = 0; c < dcls_w.size(); ++c) {
      work.grads.cls_w[c] += dcls_w[c] * inv_batch;
    }
    work.grads.cls_b += dcls_b * inv_batch;
  }
  return work;
}

std::string csv_row(int iteration, double l_cls, double l_pc, double l_puc, double l_pu,
                    double l_sep, double total, const MetricReport* val) {
  std::string row = std::to_string(iteration);
  for (double v : {l_cls, l_pc, l_puc, l_pu, l_sep, total}) {
    row += ',';
    row += fmt_g(v);
  }
  if (val != nullptr) {
    row += ',' + fmt_g(val->f1) + ',' + fmt_g(val->oa) + ',' + fmt_g(val->iou) + ',' +
           fmt_g(val->instance_count_mae);
  } else {
    row += ",,,,";
  }
  row += '\n';
  return row;
}

}  // namespace

MetricReport evaluate_model(const ModelParams& params, std::span<const SceneSample> samples,
                            const ThresholdConfig& thresholds, Supervision supervision,
                            int threads) {
  if (samples.empty()) {
    throw std::invalid_argument("evaluate_model: no samples");
  }
  validate(thresholds);
  std::vector<MetricRow> rows(samples.size());
  parallel_for(samples.size(), threads, [&](std::size_t i) {
    const SceneSample& s = samples[i];
    if (!s.gt.has_value() || !s.gt_instances.has_value()) {
      throw std::invalid_argument("evaluate_model: sample lacks ground truth");
    }
    const ForwardPass fwd = forward(params, s);
    const BinaryMask pred =
        supervision == Supervision::weak
            ? predict_change(cam_from_features(fwd.features, classifier_weights(params)),
                             thresholds.cam_score)
            : pixel_logit_mask(params, fwd.features);
    MetricRow row = evaluate(pred, *s.gt);
    row.pred_components = connectivity_search(pred).table.count();
    row.gt_components = s.gt_instances->max_id();
    row.instance_count_error =
        std::abs(static_cast<double>(row.pred_components - row.gt_components));
    rows[i] = row;
  });
  return aggregate_metrics(std::move(rows));
}

TrainResult train(const ModelConfig& model_cfg, const SynthConfig& synth_cfg,
                  const ThresholdConfig& thresholds, const SeparationConfig& separation,
                  const TrainOptions& opt) {
  validate(model_cfg);
  validate(synth_cfg);
  validate(thresholds);
  validate(separation);
  validate(opt);

  const SampleSplits splits = generate_split(synth_cfg, opt.n_train, opt.n_val, opt.n_test);
  ModelParams params = init_params(model_cfg, derive_stream(opt.seed, kParamStream));
  Rng batch_rng(derive_stream(opt.seed, kBatchStream));

  std::string csv = std::string(kTrainCsvHeader) + "\n";
  MetricReport last_val;

  const double inv_batch = 1.0 / static_cast<double>(opt.batch_size);
  std::vector<std::size_t> batch(static_cast<std::size_t>(opt.batch_size));
  std::vector<SampleWork> works(batch.size());

  for (int it = 0; it < opt.iterations; ++it) {
    for (auto& b : batch) {
      b = static_cast<std::size_t>(batch_rng.uniform_int(0, opt.n_train - 1));
    }
    const bool apply_separation = it >= separation.warmup_iterations;
    parallel_for(batch.size(), opt.threads, [&](std::size_t b) {
      works[b] = process_sample(params, splits.train[batch[b]], thresholds, separation, opt,
                                apply_separation, inv_batch);
    });

    double l_cls = 0.0, l_pc = 0.0, l_puc = 0.0, l_pu = 0.0, l_sep = 0.0;
    ModelParams grads = zeros_like(params);
    for (const SampleWork& w : works) {
      l_cls += w.l_cls * inv_batch;
      l_pc += w.l_pc * inv_batch;
      l_puc += w.l_puc * inv_batch;
      l_pu += w.l_pu * inv_batch;
      l_sep += w.l_sep * inv_batch;
      add_params(grads, w.grads);
    }
    const double total = total_loss_value(l_cls, l_sep, separation, it);
    if (!std::isfinite(total)) {
      throw std::runtime_error("training aborted: non-finite loss at iteration " +
                               std::to_string(it));
    }
    sgd_step(params, grads, opt.learning_rate);

    const bool eval_now = (it + 1) % opt.eval_interval == 0 || it == opt.iterations - 1;
    if (eval_now) {
      last_val = evaluate_model(params, splits.val, thresholds, opt.supervision, opt.threads);
      csv += csv_row(it, l_cls, l_pc, l_puc, l_pu, l_sep, total, &last_val);
    } else {
      csv += csv_row(it, l_cls, l_pc, l_puc, l_pu, l_sep, total, nullptr);
    }
  }

  return TrainResult{std::move(params), std::move(csv), std::move(last_val)};
}

namespace {

const char* axis_name(AblationAxis axis) {
  switch (axis) {
    case AblationAxis::alpha: return "alpha";
    case AblationAxis::thresholds: return "thresholds";
    case AblationAxis::scope: return "scope";
  }
  throw std::invalid_argument("bad ablation axis");
}

double parse_double(const std::string& text) {
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used != text.size()) {
    throw std::invalid_argument("cannot parse number '" + text + "'");
  }
  return v;
}

}  // namespace

AblationResult ablation_sweep(AblationAxis axis, std::span<const std::string> values,
                              const ModelConfig& model_cfg, const SynthConfig& synth_cfg,
                              const ThresholdConfig& thresholds,
                              const SeparationConfig& separation, const TrainOptions& base,
                              std::span<const std::uint64_t> seeds) {
  if (values.empty()) throw std::invalid_argument("ablation sweep needs at least one value");
  if (seeds.empty()) throw std::invalid_argument("ablation sweep needs at least one seed");

  AblationResult result;
  result.summary_csv = "axis,value,seeds,f1,oa,iou,instance_count_mae\n";

  for (const std::string& value : values) {
    ThresholdConfig thr = thresholds;
    SeparationConfig sep = separation;
    switch (axis) {
      case AblationAxis::alpha:
        sep.alpha = parse_double(value);
        break;
      case AblationAxis::thresholds: {
        const auto colon = value.find(':');
        if (colon == std::string::npos) {
          throw std::invalid_argument("threshold value must look like 'T_high:T_low', got '" +
                                      value + "'");
        }
        thr.t_high = parse_double(value.substr(0, colon));
        thr.t_low = parse_double(value.substr(colon + 1));
        break;
      }
      case AblationAxis::scope: {
        const auto scope = parse_scope(value);
        if (!scope.has_value()) {
          throw std::invalid_argument("unknown scope '" + value +
                                      "' (expected CC, CC+CU or CC+CU+UU)");
        }
        sep.scope = *scope;
        break;
      }
    }

    double f1 = 0.0, oa = 0.0, iou = 0.0, mae = 0.0;
    for (std::uint64_t seed : seeds) {
      SynthConfig synth = synth_cfg;
      synth.seed = seed;
      TrainOptions opt = base;
      opt.seed = seed;
      const TrainResult trained = train(model_cfg, synth, thr, sep, opt);
      const SampleSplits splits = generate_split(synth, opt.n_train, opt.n_val, opt.n_test);
      const MetricReport report =
          evaluate_model(trained.params, splits.test, thr, opt.supervision, opt.threads);
      result.runs.push_back(AblationRun{value, seed, report.f1, report.oa, report.iou,
                                        report.instance_count_mae});
      f1 += report.f1;
      oa += report.oa;
      iou += report.iou;
      mae += report.instance_count_mae;
    }
    const double inv = 1.0 / static_cast<double>(seeds.size());
    result.summary_csv += std::string(axis_name(axis)) + ',' + value + ',' +
                          std::to_string(seeds.size()) + ',' + fmt_g(f1 * inv) + ',' +
                          fmt_g(oa * inv) + ',' + fmt_g(iou * inv) + ',' + fmt_g(mae * inv) +
                          '\n';
  }
  return result;
}

}  // namespace wscd
