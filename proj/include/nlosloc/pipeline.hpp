// SPDX-License-Identifier: Apache-2.0
//
// Experiment orchestration: a flat key=value config resolved into typed
// settings, plus the seven pipeline stages wiring the library modules into
// reproducible seeded runs.

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "nlosloc/types.hpp"

namespace nlosloc {

inline constexpr const char* kVersion = "0.1.0";

// Flat "section.key" -> value store parsed from INI-style text. Section
// headers scope the keys that follow; '#' or ';' start a comment line.
struct ConfigMap {
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) != 0; }
  void set(const std::string& key, const std::string& value) {
    values[key] = value;
  }
  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  int get_int(const std::string& key, int fallback) const;
  std::uint64_t get_u64(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;
};

// Parses config text; throws ConfigInvalid on malformed lines or keys
// outside any section. Later duplicates win.
ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config_file(const std::filesystem::path& path);

// Applies one "section.key=value" assignment; throws ConfigInvalid when the
// assignment has no '=' or no section qualifier.
void apply_override(ConfigMap& cfg, const std::string& assignment);

// Sorted "key=value" lines; the canonical form hashed into run manifests.
std::string canonical_config_text(const ConfigMap& cfg);
std::uint64_t config_hash(const ConfigMap& cfg);

// Fully resolved experiment settings. Defaults are desk scale: 64x64
// grids, 200 train / 50 test scenes, vertex sampling, ridge denoiser.
struct ExperimentConfig {
  ConfigMap raw;

  // scenes
  std::string scene_source = "synthetic"; // "synthetic" or a directory
  // Emitter region: "lower_half" | "upper_half" | "rect:r0,c0,r1,c1"
  // (half-open cell bounds); sensing is the free complement.
  std::string restricted = "lower_half";
  int grid_size = 64;
  int buildings_min = 3;
  int buildings_max = 10;
  int train_count = 200;
  int test_count = 50;
  double cell_size = 1.0;
  double building_height = 25.0;
  double antenna_height = 1.5;
  double gain_db_min = -150.0; // dataset-sourced gain decode range
  double gain_db_max = -50.0;

  // propagation
  double frequency_hz = 5.9e9;
  double tx_power_dbm = 23.0;
  double pathloss_exponent = 3.0;
  double noise_floor_db = -150.0;

  // sampling
  std::string strategy = "vertex";
  int budget = 64;
  double random_fraction = 0.25;
  double noise_std = 0.0;

  // reconstruction
  std::string denoiser = "ridge"; // oracle | ridge | none
  int steps = 50;
  int ensemble = 3;
  bool data_consistency = true;
  int patch_radius = 2;
  double ridge_lambda = 1e-3;
  int train_draws = 1;
  int num_buckets = 10;
  double idw_power = 2.0;

  // localization
  std::vector<std::string> estimators = {"argmax", "topk", "threshold",
                                         "blob",   "ls",   "awls",
                                         "mbe",    "nls"};
  int topk = 25;
  double percentile = 99.0;
  double blob_alpha = 0.9;
  bool mbe_estimate_p0 = false;
  double model_p0_dbm = 0.0;    // 0 = derive from propagation settings
  double model_exponent = 0.0;  // 0 = propagation exponent

  // edge analysis
  std::string analysis_scene; // empty = first manifest row
  int analysis_budget = 5;
  double corr_length = 4.0;
  double probe_sigma = 1.0;
  int max_probes = 24;

  // run
  std::filesystem::path out_dir = "out";
  std::uint64_t seed = 1234;
  int workers = 1;
  bool timings = false;
};

// Validates and types the raw map. Unknown keys and out-of-range values
// throw ConfigInvalid.
ExperimentConfig resolve_config(const ConfigMap& raw);

// Pipeline stages. Each writes its artifacts under out_dir atomically and
// appends one line to out_dir/run_manifest.jsonl. Stages that consume
// another stage's outputs throw UpstreamArtifactMissing when those are
// absent. The returned string (possibly empty) is stage output intended
// for stdout.
std::string cmd_synth(const ExperimentConfig& cfg);
std::string cmd_sample(const ExperimentConfig& cfg);
std::string cmd_train(const ExperimentConfig& cfg);
std::string cmd_reconstruct(const ExperimentConfig& cfg);
std::string cmd_localize(const ExperimentConfig& cfg);
std::string cmd_evaluate(const ExperimentConfig& cfg);
std::string cmd_analyze_sampling(const ExperimentConfig& cfg);

// Dispatches "synth" | "sample" | "train" | "reconstruct" | "localize" |
// "evaluate" | "analyze-sampling"; throws ConfigInvalid on anything else.
std::string run_stage(const std::string& stage, const ExperimentConfig& cfg);

} // namespace nlosloc
