#pragma once

#include <set>
#include <string>
#include <vector>

#include "mdt/model.hpp"
#include "mdt/synth.hpp"
#include "mdt/trainer.hpp"

namespace mdt {

struct MetricSettings {
  int kid_block_size = 50;
  int kid_blocks = 100;
  int clf_base_channels = 16;
  int clf_epochs = 12;
  int clf_batch_size = 16;
  double clf_lr = 1e-3;
};

// Union of everything an experiment needs; fully serializable. The config
// hash of the canonical serialization is embedded in every artifact a command
// produces (logs, checkpoints, reports, PNGs).
struct ExperimentConfig {
  ExperimentConfig();

  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string dataset;
  std::string checkpoint;
  std::string resume;                // path or "auto"
  std::vector<std::string> inputs;   // translate inputs
  GeneratorConfig gen;
  DiscriminatorConfig disc;
  TrainConfig train;
  SynthSpec synth;
  MetricSettings metrics;
  std::set<std::string> explicit_keys;

  // Applies one flat "key = value" setting; throws ConfigError on unknown
  // keys or unparsable values. Records the key as explicitly set.
  void set(const std::string& key, const std::string& value);
  bool is_explicit(const std::string& key) const { return explicit_keys.count(key) > 0; }

  // Canonical flat serialization (sorted key=value lines).
  std::string canonical() const;
  // FNV-1a 64 of canonical(), as 16 hex chars.
  std::string config_hash() const;

  // Derived views kept in sync by set().
  void sync();
};

// Parses a flat key=value config file ('#' starts a comment).
ExperimentConfig load_config_file(const std::string& path);
void apply_config_file(ExperimentConfig& cfg, const std::string& path);

}  // namespace mdt
