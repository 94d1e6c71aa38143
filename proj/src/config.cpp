#include "wscd/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <vector>

namespace wscd {

namespace {

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r");
  return s.substr(begin, end - begin + 1);
}

std::string fmt_exact(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

long long parse_ll(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse integer '" + text + "'");
  }
}

int parse_int(const std::string& key, const std::string& text) {
  return static_cast<int>(parse_ll(key, text));
}

std::uint64_t parse_u64(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const std::uint64_t v = std::stoull(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse unsigned integer '" + text + "'");
  }
}

double parse_f64(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    const double v = std::stod(text, &used);
    if (used != text.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("key '" + key + "': cannot parse number '" + text + "'");
  }
}

struct KeyEntry {
  const char* name;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<KeyEntry>& key_table() {
  static const std::vector<KeyEntry> table = {
      {"height",
       [](RunConfig& c, const std::string& v) { c.synth.dims.height = parse_int("height", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.dims.height); }},
      {"width",
       [](RunConfig& c, const std::string& v) { c.synth.dims.width = parse_int("width", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.dims.width); }},
      {"instances_min",
       [](RunConfig& c, const std::string& v) { c.synth.instances_min = parse_int("instances_min", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.instances_min); }},
      {"instances_max",
       [](RunConfig& c, const std::string& v) { c.synth.instances_max = parse_int("instances_max", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.instances_max); }},
      {"radius_min",
       [](RunConfig& c, const std::string& v) { c.synth.radius_min = parse_int("radius_min", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.radius_min); }},
      {"radius_max",
       [](RunConfig& c, const std::string& v) { c.synth.radius_max = parse_int("radius_max", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.radius_max); }},
      {"min_gap",
       [](RunConfig& c, const std::string& v) { c.synth.min_gap = parse_int("min_gap", v); },
       [](const RunConfig& c) { return std::to_string(c.synth.min_gap); }},
      {"noise_sd",
       [](RunConfig& c, const std::string& v) { c.synth.texture_noise_sd = parse_f64("noise_sd", v); },
       [](const RunConfig& c) { return fmt_exact(c.synth.texture_noise_sd); }},
      {"p_unchanged",
       [](RunConfig& c, const std::string& v) { c.synth.p_unchanged_scene = parse_f64("p_unchanged", v); },
       [](const RunConfig& c) { return fmt_exact(c.synth.p_unchanged_scene); }},
      {"t_high",
       [](RunConfig& c, const std::string& v) { c.thresholds.t_high = parse_f64("t_high", v); },
       [](const RunConfig& c) { return fmt_exact(c.thresholds.t_high); }},
      {"t_low",
       [](RunConfig& c, const std::string& v) { c.thresholds.t_low = parse_f64("t_low", v); },
       [](const RunConfig& c) { return fmt_exact(c.thresholds.t_low); }},
      {"cam_score",
       [](RunConfig& c, const std::string& v) { c.thresholds.cam_score = parse_f64("cam_score", v); },
       [](const RunConfig& c) { return fmt_exact(c.thresholds.cam_score); }},
      {"alpha",
       [](RunConfig& c, const std::string& v) { c.separation.alpha = parse_f64("alpha", v); },
       [](const RunConfig& c) { return fmt_exact(c.separation.alpha); }},
      {"scope",
       [](RunConfig& c, const std::string& v) {
         const auto scope = parse_scope(v);
         if (!scope.has_value()) {
           throw ConfigError("key 'scope': expected CC, CC+CU or CC+CU+UU, got '" + v + "'");
         }
         c.separation.scope = *scope;
       },
       [](const RunConfig& c) { return to_string(c.separation.scope); }},
      {"warmup",
       [](RunConfig& c, const std::string& v) { c.separation.warmup_iterations = parse_int("warmup", v); },
       [](const RunConfig& c) { return std::to_string(c.separation.warmup_iterations); }},
      {"encoder_channels",
       [](RunConfig& c, const std::string& v) { c.model.encoder_channels = parse_int("encoder_channels", v); },
       [](const RunConfig& c) { return std::to_string(c.model.encoder_channels); }},
      {"feature_channels",
       [](RunConfig& c, const std::string& v) { c.model.feature_channels = parse_int("feature_channels", v); },
       [](const RunConfig& c) { return std::to_string(c.model.feature_channels); }},
      {"iterations",
       [](RunConfig& c, const std::string& v) { c.schedule.iterations = parse_int("iterations", v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.iterations); }},
      {"batch",
       [](RunConfig& c, const std::string& v) { c.schedule.batch_size = parse_int("batch", v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.batch_size); }},
      {"eval_interval",
       [](RunConfig& c, const std::string& v) { c.schedule.eval_interval = parse_int("eval_interval", v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.eval_interval); }},
      {"learning_rate",
       [](RunConfig& c, const std::string& v) { c.schedule.learning_rate = parse_f64("learning_rate", v); },
       [](const RunConfig& c) { return fmt_exact(c.schedule.learning_rate); }},
      {"n_train",
       [](RunConfig& c, const std::string& v) { c.schedule.n_train = parse_int("n_train", v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.n_train); }},
      {"n_val",
       [](RunConfig& c, const std::string& v) { c.schedule.n_val = parse_int("n_val", v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.n_val); }},
      {"n_test",
       [](RunConfig& c, const std::string& v) { c.schedule.n_test = parse_int("n_test", v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.n_test); }},
      {"threads",
       [](RunConfig& c, const std::string& v) { c.schedule.threads = parse_int("threads", v); },
       [](const RunConfig& c) { return std::to_string(c.schedule.threads); }},
      {"seed",
       [](RunConfig& c, const std::string& v) {
         const std::uint64_t seed = parse_u64("seed", v);
         c.schedule.seed = seed;
         c.synth.seed = seed;
       },
       [](const RunConfig& c) { return std::to_string(c.schedule.seed); }},
      {"supervision",
       [](RunConfig& c, const std::string& v) {
         if (v == "weak") c.schedule.supervision = Supervision::weak;
         else if (v == "full") c.schedule.supervision = Supervision::full;
         else throw ConfigError("key 'supervision': expected weak or full, got '" + v + "'");
       },
       [](const RunConfig& c) {
         return c.schedule.supervision == Supervision::weak ? "weak" : "full";
       }},
      {"eval_split",
       [](RunConfig& c, const std::string& v) {
         if (v != "test" && v != "val") {
           throw ConfigError("key 'eval_split': expected test or val, got '" + v + "'");
         }
         c.eval_split = v;
       },
       [](const RunConfig& c) { return c.eval_split; }},
      {"ablate_seeds",
       [](RunConfig& c, const std::string& v) { c.ablate_seeds = parse_int("ablate_seeds", v); },
       [](const RunConfig& c) { return std::to_string(c.ablate_seeds); }},
      {"out_dir",
       [](RunConfig& c, const std::string& v) { c.out_dir = v; },
       [](const RunConfig& c) { return c.out_dir; }},
  };
  return table;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const KeyEntry& entry : key_table()) {
    if (key == entry.name) {
      entry.set(cfg, value);
      return;
    }
  }
  throw ConfigError("unknown key '" + key + "'");
}

RunConfig load_config_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path.string());
  }
  RunConfig cfg;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) +
                        ": expected 'key = value'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    try {
      apply_override(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

std::string resolved_config_text(const RunConfig& cfg) {
  std::string text;
  for (const KeyEntry& entry : key_table()) {
    text += entry.name;
    text += " = ";
    text += entry.get(cfg);
    text += '\n';
  }
  return text;
}

void validate(const RunConfig& cfg) {
  try {
    validate(cfg.synth);
    validate(cfg.thresholds);
    validate(cfg.separation);
    validate(cfg.model);
    validate(cfg.schedule);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  if (cfg.ablate_seeds < 1) {
    throw ConfigError("ablate_seeds must be at least 1");
  }
  if (cfg.out_dir.empty()) {
    throw ConfigError("out_dir must not be empty");
  }
}

}  // namespace wscd
