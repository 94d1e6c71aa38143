#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <sstream>
#include <string>
#include <vector>

#include "oracle.hpp"
#include "wscd/harness.hpp"
#include "wscd/retrieve.hpp"

using namespace wscd;

namespace {

// Small, fast configuration shared by the training-loop tests.
struct TinySetup {
  ModelConfig model{4, 4};
  SynthConfig synth;
  ThresholdConfig thresholds;
  SeparationConfig separation{0.1, SamplingScope::cc_cu_uu, 2};
  TrainOptions opt;

  TinySetup() {
    synth.dims = Dim2{24, 24};
    synth.instances_min = 1;
    synth.instances_max = 3;
    synth.radius_min = 2;
    synth.radius_max = 3;
    synth.min_gap = 3;
    synth.p_unchanged_scene = 0.3;
    synth.seed = 9;
    opt.iterations = 6;
    opt.batch_size = 2;
    opt.eval_interval = 3;
    opt.learning_rate = 0.05;
    opt.seed = 9;
    opt.n_train = 6;
    opt.n_val = 2;
    opt.n_test = 3;
    opt.threads = 2;
  }
};

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return lines;
}

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.push_back("");
  return fields;
}

// Independent four-counter implementation of the pixel metrics.
MetricRow naive_evaluate(const BinaryMask& pred, const BinaryMask& gt) {
  MetricRow row;
  for (std::size_t i = 0; i < pred.dims().pixel_count(); ++i) {
    row.tp += pred.bit(i) && gt.bit(i) ? 1 : 0;
    row.fp += pred.bit(i) && !gt.bit(i) ? 1 : 0;
    row.fn += !pred.bit(i) && gt.bit(i) ? 1 : 0;
    row.tn += !pred.bit(i) && !gt.bit(i) ? 1 : 0;
  }
  const double tp = static_cast<double>(row.tp);
  row.precision = row.tp + row.fp > 0 ? tp / static_cast<double>(row.tp + row.fp)
                                      : (row.tp + row.fn == 0 ? 1.0 : 0.0);
  row.recall = row.tp + row.fn > 0 ? tp / static_cast<double>(row.tp + row.fn)
                                   : (row.tp + row.fp == 0 ? 1.0 : 0.0);
  row.f1 = row.precision + row.recall > 0.0
               ? 2.0 * row.precision * row.recall / (row.precision + row.recall)
               : 0.0;
  row.oa = static_cast<double>(row.tp + row.tn) /
           static_cast<double>(pred.dims().pixel_count());
  row.iou = row.tp + row.fp + row.fn > 0
                ? tp / static_cast<double>(row.tp + row.fp + row.fn)
                : 1.0;
  return row;
}

}  // namespace

TEST_CASE("perfect prediction scores ones") {
  const BinaryMask gt(Dim2{2, 2}, {1, 0, 1, 0});
  const MetricRow row = evaluate(gt, gt);
  CHECK(row.f1 == 1.0);
  CHECK(row.oa == 1.0);
  CHECK(row.iou == 1.0);
}

TEST_CASE("all-changed prediction against a half-changed truth") {
  const BinaryMask gt(Dim2{2, 2}, {1, 1, 0, 0});
  const BinaryMask pred(Dim2{2, 2}, {1, 1, 1, 1});
  const MetricRow row = evaluate(pred, gt);
  CHECK(row.precision == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(row.recall == 1.0);
  CHECK(row.f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(row.iou == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(row.oa == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("empty truth with empty prediction counts as perfect") {
  const MetricRow row = evaluate(BinaryMask::zeros(Dim2{3, 3}), BinaryMask::zeros(Dim2{3, 3}));
  CHECK(row.precision == 1.0);
  CHECK(row.recall == 1.0);
  CHECK(row.f1 == 1.0);
  CHECK(row.iou == 1.0);
  CHECK(row.oa == 1.0);
}

TEST_CASE("evaluate rejects mismatched dimensions") {
  CHECK_THROWS_AS(evaluate(BinaryMask::zeros(Dim2{2, 2}), BinaryMask::zeros(Dim2{2, 3})),
                  std::invalid_argument);
}

TEST_CASE("metric identities and the naive oracle on random masks") {
  Rng rng(55);
  for (int trial = 0; trial < 60; ++trial) {
    const Dim2 dims{rng.uniform_int(1, 12), rng.uniform_int(1, 12)};
    const BinaryMask pred = oracle::random_mask(rng, dims, rng.uniform());
    const BinaryMask gt = oracle::random_mask(rng, dims, rng.uniform());
    const MetricRow row = evaluate(pred, gt);
    const MetricRow want = naive_evaluate(pred, gt);

    CHECK(row.tp == want.tp);
    CHECK(row.fp == want.fp);
    CHECK(row.fn == want.fn);
    CHECK(row.tn == want.tn);
    CHECK(row.precision == want.precision);
    CHECK(row.recall == want.recall);
    CHECK(row.f1 == want.f1);
    CHECK(row.oa == want.oa);
    CHECK(row.iou == want.iou);

    // IoU == F1 / (2 - F1), and OA + (FP+FN)/HW == 1
    CHECK(row.iou == doctest::Approx(row.f1 / (2.0 - row.f1)).epsilon(1e-12));
    const double misrate = static_cast<double>(row.fp + row.fn) /
                           static_cast<double>(dims.pixel_count());
    CHECK(row.oa + misrate == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.iou <= row.f1 + 1e-15);
  }
}

TEST_CASE("instance count error measures lumping") {
  // six isolated pixels lumped into one solid block: error 5
  std::vector<int> gt_ids(8 * 8, 0);
  for (int k = 0; k < 6; ++k) gt_ids[static_cast<std::size_t>((k / 3) * 4 * 8 + (k % 3) * 3)] = k + 1;
  const InstanceIdMask gt_instances(Dim2{8, 8}, gt_ids);
  std::vector<std::uint8_t> lump(8 * 8, 1);
  CHECK(instance_count_error(BinaryMask(Dim2{8, 8}, lump), gt_instances) == 5.0);

  // matching count: zero error
  std::vector<std::uint8_t> exact(8 * 8, 0);
  for (std::size_t i = 0; i < gt_ids.size(); ++i) exact[i] = gt_ids[i] > 0 ? 1 : 0;
  CHECK(instance_count_error(BinaryMask(Dim2{8, 8}, exact), gt_instances) == 0.0);

  // empty prediction against three instances
  std::vector<int> three(6 * 6, 0);
  three[0] = 1;
  three[5] = 2;
  three[30] = 3;
  CHECK(instance_count_error(BinaryMask::zeros(Dim2{6, 6}), InstanceIdMask(Dim2{6, 6}, three)) ==
        3.0);
}

TEST_CASE("aggregation averages rows") {
  MetricRow a;
  a.f1 = 1.0;
  a.oa = 1.0;
  a.iou = 1.0;
  a.instance_count_error = 0.0;
  MetricRow b;
  b.f1 = 0.5;
  b.oa = 0.8;
  b.iou = 0.4;
  b.instance_count_error = 3.0;
  const MetricReport report = aggregate_metrics({a, b});
  CHECK(report.f1 == doctest::Approx(0.75));
  CHECK(report.oa == doctest::Approx(0.9));
  CHECK(report.iou == doctest::Approx(0.7));
  CHECK(report.instance_count_mae == doctest::Approx(1.5));
  CHECK_THROWS_AS(aggregate_metrics({}), std::invalid_argument);
}

TEST_CASE("training emits the documented csv schema") {
  const TinySetup t;
  const TrainResult result = train(t.model, t.synth, t.thresholds, t.separation, t.opt);
  const auto lines = split_lines(result.csv);
  REQUIRE(lines.size() == static_cast<std::size_t>(t.opt.iterations) + 1);
  CHECK(lines[0] == kTrainCsvHeader);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    REQUIRE(fields.size() == 11);
    CHECK(fields[0] == std::to_string(i - 1));
    const bool is_eval = (i % 3 == 0) || i == lines.size() - 1;
    CHECK(fields[7].empty() == !is_eval);
  }
}

TEST_CASE("warmup gates the separation term in the total loss") {
  const TinySetup t;
  const TrainResult result = train(t.model, t.synth, t.thresholds, t.separation, t.opt);
  const auto lines = split_lines(result.csv);
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const auto fields = split_fields(lines[i]);
    const int iteration = std::stoi(fields[0]);
    const double l_cls = std::stod(fields[1]);
    const double l_sep = std::stod(fields[5]);
    const double total = std::stod(fields[6]);
    if (iteration < t.separation.warmup_iterations) {
      CHECK(fields[6] == fields[1]);  // byte-identical columns before warmup
    } else {
      CHECK(total ==
            doctest::Approx(l_cls + t.separation.alpha * l_sep).epsilon(1e-9));
    }
  }
}

TEST_CASE("alpha zero matches a build with the instance pipeline removed") {
  TinySetup t;
  t.separation.alpha = 0.0;
  const TrainResult with_pipeline = train(t.model, t.synth, t.thresholds, t.separation, t.opt);

  TrainOptions no_pipeline = t.opt;
  no_pipeline.run_instance_pipeline = false;
  const TrainResult without = train(t.model, t.synth, t.thresholds, t.separation, no_pipeline);

  const auto a = flatten_params(with_pipeline.params);
  const auto b = flatten_params(without.params);
  REQUIRE(a.size() == b.size());
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);

  // branch losses are still logged in the pipeline run
  bool saw_sep = false;
  for (const auto& line : split_lines(with_pipeline.csv)) {
    const auto fields = split_fields(line);
    if (fields.size() == 11 && fields[5] != "l_sep" && std::stod(fields[5]) > 0.0) {
      saw_sep = true;
    }
  }
  CHECK(saw_sep);
}

TEST_CASE("fixed seeds reproduce the csv byte for byte") {
  const TinySetup t;
  const TrainResult a = train(t.model, t.synth, t.thresholds, t.separation, t.opt);
  const TrainResult b = train(t.model, t.synth, t.thresholds, t.separation, t.opt);
  CHECK(a.csv == b.csv);
  CHECK(flatten_params(a.params) == flatten_params(b.params));

  TrainOptions other = t.opt;
  other.seed = t.opt.seed + 1;
  const TrainResult c = train(t.model, t.synth, t.thresholds, t.separation, other);
  CHECK(a.csv != c.csv);
}

TEST_CASE("thread count does not change the result") {
  const TinySetup t;
  TrainOptions serial = t.opt;
  serial.threads = 1;
  TrainOptions parallel = t.opt;
  parallel.threads = 4;
  const TrainResult a = train(t.model, t.synth, t.thresholds, t.separation, serial);
  const TrainResult b = train(t.model, t.synth, t.thresholds, t.separation, parallel);
  CHECK(a.csv == b.csv);
  CHECK(flatten_params(a.params) == flatten_params(b.params));
}

TEST_CASE("full supervision trains and evaluates") {
  TinySetup t;
  t.opt.supervision = Supervision::full;
  const TrainResult result = train(t.model, t.synth, t.thresholds, t.separation, t.opt);
  CHECK(split_lines(result.csv).size() == static_cast<std::size_t>(t.opt.iterations) + 1);
  CHECK(result.final_val.f1 >= 0.0);
  CHECK(result.final_val.f1 <= 1.0);
}

TEST_CASE("evaluate_model covers every sample") {
  const TinySetup t;
  const SampleSplits splits = generate_split(t.synth, t.opt.n_train, t.opt.n_val, t.opt.n_test);
  const ModelParams params = init_params(t.model, 3);
  const MetricReport report =
      evaluate_model(params, splits.test, t.thresholds, Supervision::weak, 2);
  CHECK(report.rows.size() == splits.test.size());
  for (const MetricRow& row : report.rows) {
    CHECK(row.tp + row.fp + row.fn + row.tn == t.synth.dims.pixel_count());
  }
}

TEST_CASE("ablation sweep emits one summary row per value") {
  TinySetup t;
  t.opt.iterations = 4;
  const std::vector<std::string> values{"0", "0.1"};
  const std::vector<std::uint64_t> seeds{5, 6};
  const AblationResult result = ablation_sweep(AblationAxis::alpha, values, t.model, t.synth,
                                               t.thresholds, t.separation, t.opt, seeds);
  const auto lines = split_lines(result.summary_csv);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "axis,value,seeds,f1,oa,iou,instance_count_mae");
  CHECK(lines[1].substr(0, 8) == "alpha,0,");
  CHECK(lines[2].substr(0, 10) == "alpha,0.1,");
  CHECK(result.runs.size() == 4);

  // thresholds axis parses T_high:T_low pairs
  const std::vector<std::string> pair{"0.6:0.4"};
  CHECK_NOTHROW(ablation_sweep(AblationAxis::thresholds, pair, t.model, t.synth, t.thresholds,
                               t.separation, t.opt, std::vector<std::uint64_t>{5}));
  const std::vector<std::string> bad{"0.6"};
  CHECK_THROWS_AS(ablation_sweep(AblationAxis::thresholds, bad, t.model, t.synth, t.thresholds,
                                 t.separation, t.opt, seeds),
                  std::invalid_argument);
  const std::vector<std::string> bad_scope{"XX"};
  CHECK_THROWS_AS(ablation_sweep(AblationAxis::scope, bad_scope, t.model, t.synth, t.thresholds,
                                 t.separation, t.opt, seeds),
                  std::invalid_argument);
}

TEST_CASE("train options are validated") {
  TinySetup t;
  t.opt.iterations = 0;
  CHECK_THROWS_AS(train(t.model, t.synth, t.thresholds, t.separation, t.opt),
                  std::invalid_argument);
  t = TinySetup{};
  t.opt.learning_rate = 0.0;
  CHECK_THROWS_AS(train(t.model, t.synth, t.thresholds, t.separation, t.opt),
                  std::invalid_argument);
  t = TinySetup{};
  t.separation.alpha = -1.0;
  CHECK_THROWS_AS(train(t.model, t.synth, t.thresholds, t.separation, t.opt),
                  std::invalid_argument);
}
