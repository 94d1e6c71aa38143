#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>

#include "wscd/harness.hpp"

namespace wscd {

// Usage/configuration problems (bad key, unparsable value, missing file).
// The CLI maps these to exit code 1; everything else is a runtime failure.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat key=value document driving the whole pipeline. One seed feeds data
// generation, parameter init and batch order, so the resolved snapshot plus
// the seed pin every artifact byte-for-byte.
struct RunConfig {
  SynthConfig synth;
  ThresholdConfig thresholds;
  SeparationConfig separation;
  ModelConfig model;
  TrainOptions schedule;
  std::string out_dir = "out";
  std::string eval_split = "test";  // "test" or "val"
  int ablate_seeds = 3;
};

// Plain text, one "key = value" per line; '#' starts a comment. Unknown keys
// are rejected with the offending line number.
RunConfig load_config_file(const std::filesystem::path& path);

// One "--set key=value" override; throws ConfigError naming the key.
void apply_override(RunConfig& cfg, const std::string& key, const std::string& value);

// Canonical snapshot: every key with its current value, reparsable as a
// config file. Doubles are printed with enough digits to round-trip.
std::string resolved_config_text(const RunConfig& cfg);

void validate(const RunConfig& cfg);

}  // namespace wscd
