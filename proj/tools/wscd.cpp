#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "wscd/cam.hpp"
#include "wscd/config.hpp"
#include "wscd/harness.hpp"
#include "wscd/retrieve.hpp"

namespace fs = std::filesystem;
using namespace wscd;

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> sets;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
};

void add_common_options(CLI::App* sub, CommonArgs& args) {
  sub->add_option("--config", args.config_path, "config file (key = value lines)");
  sub->add_option("--set", args.sets, "override, KEY=VALUE (repeatable)");
  sub->add_option("--out", args.out_dir, "output directory");
  sub->add_option("--seed", args.seed, "seed override");
}

RunConfig resolve_config(const CommonArgs& args) {
  RunConfig cfg;
  if (!args.config_path.empty()) {
    cfg = load_config_file(args.config_path);
  }
  for (const std::string& kv : args.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects KEY=VALUE, got '" + kv + "'");
    }
    apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (args.seed.has_value()) {
    apply_override(cfg, "seed", std::to_string(*args.seed));
  }
  if (!args.out_dir.empty()) {
    cfg.out_dir = args.out_dir;
  }
  validate(cfg);
  return cfg;
}

fs::path prepare_out_dir(const RunConfig& cfg) {
  const fs::path dir(cfg.out_dir);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + cfg.out_dir + "'");
  }
  return dir;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
  if (!out) throw std::runtime_error("failed writing " + path.string());
}

// Wall-clock info lives only here so every other artifact stays
// byte-reproducible.
void write_metadata(const fs::path& dir, const std::string& command) {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char stamp[64];
  std::strftime(stamp, sizeof(stamp), "%Y-%m-%dT%H:%M:%S", std::gmtime(&t));
  write_text(dir / "metadata.txt",
             "command = " + command + "\ngenerated_utc = " + stamp + "\n");
}

std::string metric_summary(const MetricReport& report, std::size_t n_samples) {
  std::string text;
  text += "samples: " + std::to_string(n_samples) + "\n";
  text += "f1: " + fmt_g(report.f1) + "\n";
  text += "oa: " + fmt_g(report.oa) + "\n";
  text += "iou: " + fmt_g(report.iou) + "\n";
  text += "precision: " + fmt_g(report.precision) + "\n";
  text += "recall: " + fmt_g(report.recall) + "\n";
  text += "instance_count_mae: " + fmt_g(report.instance_count_mae) + "\n";
  return text;
}

std::string eval_rows_csv(const MetricReport& report) {
  std::string csv =
      "sample,tp,fp,fn,tn,precision,recall,f1,oa,iou,pred_components,gt_components,"
      "instance_count_error\n";
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    const MetricRow& r = report.rows[i];
    csv += std::to_string(i) + ',' + std::to_string(r.tp) + ',' + std::to_string(r.fp) + ',' +
           std::to_string(r.fn) + ',' + std::to_string(r.tn) + ',' + fmt_g(r.precision) + ',' +
           fmt_g(r.recall) + ',' + fmt_g(r.f1) + ',' + fmt_g(r.oa) + ',' + fmt_g(r.iou) + ',' +
           std::to_string(r.pred_components) + ',' + std::to_string(r.gt_components) + ',' +
           fmt_g(r.instance_count_error) + '\n';
  }
  return csv;
}

int cmd_gen_data(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const fs::path dir = prepare_out_dir(cfg);
  write_metadata(dir, "gen-data");
  write_text(dir / "resolved.cfg", resolved_config_text(cfg));

  const SampleSplits splits =
      generate_split(cfg.synth, cfg.schedule.n_train, cfg.schedule.n_val, cfg.schedule.n_test);
  std::string manifest = "split,index,y_cls,instances\n";
  auto dump = [&](const char* split, const std::vector<SceneSample>& samples) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const SceneSample& s = samples[i];
      char name[64];
      std::snprintf(name, sizeof(name), "%s_%04zu", split, i);
      write_ppm(s.x_t1, dir / (std::string(name) + "_t1.ppm"));
      write_ppm(s.x_t2, dir / (std::string(name) + "_t2.ppm"));
      write_pgm(*s.gt, dir / (std::string(name) + "_gt.pgm"));
      write_pgm(*s.gt_instances, dir / (std::string(name) + "_instances.pgm"));
      manifest += std::string(split) + ',' + std::to_string(i) + ',' +
                  std::to_string(s.y_cls) + ',' + std::to_string(s.gt_instances->max_id()) +
                  '\n';
    }
  };
  dump("train", splits.train);
  dump("val", splits.val);
  dump("test", splits.test);
  write_text(dir / "manifest.csv", manifest);
  std::cout << "wrote " << splits.train.size() + splits.val.size() + splits.test.size()
            << " samples to " << dir.string() << "\n";
  return 0;
}

int cmd_train(const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const fs::path dir = prepare_out_dir(cfg);
  write_metadata(dir, "train");
  write_text(dir / "resolved.cfg", resolved_config_text(cfg));

  const TrainResult result =
      train(cfg.model, cfg.synth, cfg.thresholds, cfg.separation, cfg.schedule);
  write_text(dir / "train_log.csv", result.csv);
  save_checkpoint(result.params, dir / "checkpoint.bin");

  std::cout << "training complete\n"
            << "val_f1: " << fmt_g(result.final_val.f1) << "\n"
            << "val_oa: " << fmt_g(result.final_val.oa) << "\n"
            << "val_iou: " << fmt_g(result.final_val.iou) << "\n"
            << "val_inst_mae: " << fmt_g(result.final_val.instance_count_mae) << "\n"
            << "artifacts: " << dir.string() << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, bool dump_masks, const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  const fs::path dir = prepare_out_dir(cfg);
  const ModelParams params = load_checkpoint(checkpoint, cfg.model);

  const SampleSplits splits =
      generate_split(cfg.synth, cfg.schedule.n_train, cfg.schedule.n_val, cfg.schedule.n_test);
  const std::vector<SceneSample>& samples = cfg.eval_split == "val" ? splits.val : splits.test;

  const MetricReport report = evaluate_model(params, samples, cfg.thresholds,
                                             cfg.schedule.supervision, cfg.schedule.threads);
  write_text(dir / "eval.csv", eval_rows_csv(report));
  std::cout << metric_summary(report, samples.size());

  if (dump_masks) {
    for (std::size_t i = 0; i < samples.size(); ++i) {
      const SceneSample& s = samples[i];
      const ForwardPass fwd = forward(params, s);
      const BinaryMask pred =
          predict_change(cam_from_features(fwd.features, classifier_weights(params)),
                         cfg.thresholds.cam_score);
      char name[64];
      std::snprintf(name, sizeof(name), "eval_%04zu", i);
      write_pgm(pred, dir / (std::string(name) + "_pred.pgm"));
      write_pgm(*s.gt, dir / (std::string(name) + "_gt.pgm"));
      write_pgm(connectivity_search(pred).id_mask,
                dir / (std::string(name) + "_pred_instances.pgm"));
    }
  }
  return 0;
}

int cmd_ablate(const std::string& axis_name, const std::string& values_text,
               const CommonArgs& args) {
  const RunConfig cfg = resolve_config(args);
  AblationAxis axis;
  if (axis_name == "alpha") axis = AblationAxis::alpha;
  else if (axis_name == "thresholds") axis = AblationAxis::thresholds;
  else if (axis_name == "scope") axis = AblationAxis::scope;
  else throw ConfigError("unknown axis '" + axis_name + "' (valid: alpha, thresholds, scope)");

  std::vector<std::string> values;
  std::size_t start = 0;
  while (start <= values_text.size()) {
    const auto comma = values_text.find(',', start);
    const std::string piece =
        values_text.substr(start, comma == std::string::npos ? std::string::npos : comma - start);
    if (!piece.empty()) values.push_back(piece);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (values.empty()) {
    throw ConfigError("--values must list at least one value");
  }

  std::vector<std::uint64_t> seeds;
  for (int i = 0; i < cfg.ablate_seeds; ++i) {
    seeds.push_back(cfg.schedule.seed + static_cast<std::uint64_t>(i));
  }

  const fs::path dir = prepare_out_dir(cfg);
  write_metadata(dir, "ablate");
  write_text(dir / "resolved.cfg", resolved_config_text(cfg));

  const AblationResult result = ablation_sweep(axis, values, cfg.model, cfg.synth,
                                               cfg.thresholds, cfg.separation, cfg.schedule,
                                               seeds);
  write_text(dir / ("ablation_" + axis_name + ".csv"), result.summary_csv);
  std::cout << result.summary_csv;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"synthetic bi-temporal change detection lab"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset dump");
  add_common_options(gen, gen_args);

  CommonArgs train_args;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and write artifacts");
  add_common_options(train_cmd, train_args);

  CommonArgs eval_args;
  std::string checkpoint;
  bool dump_masks = false;
  CLI::App* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("checkpoint", checkpoint, "checkpoint file")->required();
  eval_cmd->add_flag("--dump-masks", dump_masks, "write per-sample PGM masks");
  add_common_options(eval_cmd, eval_args);

  CommonArgs ablate_args;
  std::string axis;
  std::string values;
  CLI::App* ablate_cmd = app.add_subcommand("ablate", "sweep one configuration axis");
  ablate_cmd->add_option("--axis", axis, "alpha, thresholds or scope")->required();
  ablate_cmd->add_option("--values", values, "comma-separated values")->required();
  add_common_options(ablate_cmd, ablate_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (gen->parsed()) return cmd_gen_data(gen_args);
    if (train_cmd->parsed()) return cmd_train(train_args);
    if (eval_cmd->parsed()) return cmd_eval(checkpoint, dump_masks, eval_args);
    if (ablate_cmd->parsed()) return cmd_ablate(axis, values, ablate_args);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
