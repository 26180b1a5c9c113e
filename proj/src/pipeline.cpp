// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "nlosloc/dataio.hpp"
#include "nlosloc/diffusion.hpp"
#include "nlosloc/errors.hpp"
#include "nlosloc/localization.hpp"
#include "nlosloc/metrics.hpp"
#include "nlosloc/rng.hpp"
#include "nlosloc/sampling.hpp"

namespace nlosloc {

namespace fs = std::filesystem;

namespace {

// ---- small text utilities -------------------------------------------------

std::string trim(const std::string& s) {
  const auto begin = s.find_first_not_of(" \t\r\n");
  if (begin == std::string::npos) return "";
  const auto end = s.find_last_not_of(" \t\r\n");
  return s.substr(begin, end - begin + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string::size_type start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(s.substr(start));
      return out;
    }
    out.push_back(s.substr(start, pos - start));
    start = pos + 1;
  }
}

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::string current;
  for (char c : text) {
    if (c == '\n') {
      if (!current.empty() && current.back() == '\r') current.pop_back();
      lines.push_back(current);
      current.clear();
    } else {
      current += c;
    }
  }
  if (!current.empty()) lines.push_back(current);
  return lines;
}

std::string format_num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("expected a number for " + what + ", got '" + s + "'");
  }
}

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FileNotFound("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---- deterministic scene-parallel execution -------------------------------

void parallel_for(std::size_t count, int workers,
                  const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::mutex err_mutex;
  std::exception_ptr first_error;
  auto body = [&] {
    while (!failed.load()) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const auto n_threads =
      std::min<std::size_t>(static_cast<std::size_t>(workers), count);
  pool.reserve(n_threads);
  for (std::size_t i = 0; i < n_threads; ++i) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

// ---- shared stage plumbing ------------------------------------------------

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "scenes.source",          "scenes.restricted",
      "scenes.grid_size",
      "scenes.buildings_min",   "scenes.buildings_max",
      "scenes.train_count",     "scenes.test_count",
      "scenes.cell_size",       "scenes.building_height",
      "scenes.antenna_height",  "scenes.gain_db_min",
      "scenes.gain_db_max",     "propagation.frequency_hz",
      "propagation.tx_power_dbm", "propagation.pathloss_exponent",
      "propagation.noise_floor_db", "sampling.strategy",
      "sampling.budget",        "sampling.random_fraction",
      "sampling.noise_std",     "reconstruction.denoiser",
      "reconstruction.steps",   "reconstruction.ensemble",
      "reconstruction.data_consistency", "reconstruction.patch_radius",
      "reconstruction.ridge_lambda", "reconstruction.train_draws",
      "reconstruction.num_buckets", "reconstruction.idw_power",
      "localization.estimators", "localization.topk",
      "localization.percentile", "localization.blob_alpha",
      "localization.mbe_estimate_p0", "localization.model_p0_dbm",
      "localization.model_exponent", "analysis.scene",
      "analysis.budget",        "analysis.corr_length",
      "analysis.sigma",         "analysis.max_probes",
      "run.out",                "run.seed",
      "run.workers",            "run.timings"};
  return keys;
}

PropagationParams params_of(const ExperimentConfig& cfg) {
  return make_params(cfg.frequency_hz, cfg.tx_power_dbm,
                     cfg.pathloss_exponent, cfg.noise_floor_db);
}

PathlossModel model_of(const ExperimentConfig& cfg) {
  const PropagationParams p = params_of(cfg);
  PathlossModel m;
  m.p0_dbm = cfg.model_p0_dbm != 0.0
                 ? cfg.model_p0_dbm
                 : p.tx_power_dbm - p.reference_loss_db;
  m.exponent = cfg.model_exponent != 0.0 ? cfg.model_exponent
                                         : cfg.pathloss_exponent;
  m.reference_m = 1.0;
  return m;
}

fs::path scenes_dir_of(const ExperimentConfig& cfg) {
  return cfg.scene_source == "synthetic" ? cfg.out_dir / "scenes"
                                         : fs::path(cfg.scene_source);
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path))
    throw UpstreamArtifactMissing(path.string() + " not found; run the " +
                                  producer + " stage first");
}

std::vector<ManifestRow> load_scene_manifest(const ExperimentConfig& cfg) {
  const fs::path manifest = scenes_dir_of(cfg) / "manifest.csv";
  require_artifact(manifest, "synth");
  return load_manifest(manifest);
}

// Reassigns the emitter/sensing split. make_environment already labels the
// default lower-half split, so only the non-default specs rebuild masks.
void apply_region(EnvironmentGrid& env, const std::string& spec) {
  if (spec == "lower_half") return;
  const int n = env.size();
  int r0 = 0, c0 = 0, r1 = 0, c1 = 0;
  if (spec == "upper_half") {
    r1 = n / 2;
    c1 = n;
  } else if (spec.rfind("rect:", 0) == 0) {
    const auto parts = split(spec.substr(5), ',');
    if (parts.size() != 4)
      throw ConfigInvalid("restricted rect needs r0,c0,r1,c1: " + spec);
    try {
      r0 = std::stoi(parts[0]);
      c0 = std::stoi(parts[1]);
      r1 = std::stoi(parts[2]);
      c1 = std::stoi(parts[3]);
    } catch (const std::exception&) {
      throw ConfigInvalid("restricted rect needs integer bounds: " + spec);
    }
    if (r0 < 0 || c0 < 0 || r1 > n || c1 > n || r0 >= r1 || c0 >= c1)
      throw ConfigInvalid("restricted rect out of range: " + spec);
  } else {
    throw ConfigInvalid("unknown restricted-region spec '" + spec + "'");
  }
  env.restricted_mask = MaskGrid::Zero(n, n);
  env.sensing_mask = MaskGrid::Zero(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (env.occupancy(r, c)) continue;
      if (r >= r0 && r < r1 && c >= c0 && c < c1)
        env.restricted_mask(r, c) = 1;
      else
        env.sensing_mask(r, c) = 1;
    }
  env.validate();
}

EnvironmentGrid load_env_for(const ExperimentConfig& cfg,
                             const std::string& id) {
  EnvironmentGrid env =
      load_building_map(scenes_dir_of(cfg) / id / "building.png", true,
                        cfg.cell_size, cfg.building_height,
                        cfg.antenna_height);
  apply_region(env, cfg.restricted);
  return env;
}

// Raw dB truth. Synthetic scenes re-synthesize it exactly from the building
// map and the manifest emitter cell; dataset scenes decode the stored gain
// image through the configured dB range.
RadioMap truth_db_map(const ExperimentConfig& cfg, const EnvironmentGrid& env,
                      const ManifestRow& row) {
  if (cfg.scene_source == "synthetic")
    return synthesize_radio_map(env, row.tx, params_of(cfg));
  const fs::path gain = scenes_dir_of(cfg) / row.scene_id / "gain_tx0.png";
  require_artifact(gain, "scene import");
  RadioMap norm = load_gain_map(gain, true);
  RadioMap db = denormalize_gain(norm, cfg.gain_db_min, cfg.gain_db_max);
  db.tx = row.tx;
  return db;
}

SamplingMask build_mask(const ExperimentConfig& cfg,
                        const EnvironmentGrid& env, std::size_t index) {
  const std::uint64_t seed =
      derive_seed(cfg.seed, stream_tag("mask"), index);
  if (cfg.strategy == "random") return random_mask(env, cfg.budget, seed);
  if (cfg.strategy == "edge") return edge_mask(env);
  if (cfg.strategy == "vertex") return vertex_mask(env);
  if (cfg.strategy == "hybrid")
    return hybrid_mask(env, cfg.random_fraction, seed);
  if (cfg.strategy == "budget_matched_random")
    return budget_matched_random(env, vertex_mask(env), seed);
  throw ConfigInvalid("unknown sampling strategy '" + cfg.strategy + "'");
}

void save_measurements(const MeasurementSet& m, const fs::path& path) {
  std::string out = "row,col,rss_db\r\n";
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    out += std::to_string(m.points[i].row);
    out += ',';
    out += std::to_string(m.points[i].col);
    out += ',';
    out += format_num(m.raw_db[i]);
    out += "\r\n";
  }
  write_file_atomic(path, out);
}

MeasurementSet load_measurements(const fs::path& path, double noise_std) {
  const auto lines = split_lines(read_text_file(path));
  if (lines.empty() || lines[0] != "row,col,rss_db")
    throw ConfigInvalid("malformed measurements file " + path.string());
  MeasurementSet m;
  m.noise_std = noise_std;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto fields = split(lines[i], ',');
    if (fields.size() != 3)
      throw ConfigInvalid("malformed measurements file " + path.string());
    m.points.push_back({std::stoi(fields[0]), std::stoi(fields[1])});
    m.raw_db.push_back(parse_double(fields[2], "rss_db"));
  }
  return m;
}

ConditionTensor condition_for(const ExperimentConfig& cfg,
                              const EnvironmentGrid& env,
                              const std::string& id) {
  const fs::path meas = cfg.out_dir / "samples" / id / "measurements.csv";
  require_artifact(meas, "sample");
  const MeasurementSet raw = load_measurements(meas, cfg.noise_std);
  return build_condition_tensor(env, normalize_rss(raw));
}

void append_run_manifest(const ExperimentConfig& cfg,
                         const std::string& stage) {
  char hash[32];
  std::snprintf(hash, sizeof(hash), "%016llx",
                static_cast<unsigned long long>(config_hash(cfg.raw)));
  nlohmann::json line = {{"config_hash", hash},
                         {"seed", cfg.seed},
                         {"stage", stage},
                         {"version", kVersion},
                         {"workers", cfg.workers}};
  const fs::path path = cfg.out_dir / "run_manifest.jsonl";
  std::string body;
  if (fs::exists(path)) body = read_text_file(path);
  body += line.dump();
  body += '\n';
  write_file_atomic(path, body);
}

std::vector<ManifestRow> rows_of_split(const std::vector<ManifestRow>& rows,
                                       const std::string& split) {
  std::vector<ManifestRow> out;
  for (const auto& r : rows)
    if (r.split == split) out.push_back(r);
  return out;
}

MaskGrid restricted_free_region(const EnvironmentGrid& env) {
  const int n = env.size();
  MaskGrid region = MaskGrid::Zero(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c)
      if (env.restricted_mask(r, c) && !env.occupancy(r, c)) region(r, c) = 1;
  return region;
}

std::vector<RadioMap> load_members(const ExperimentConfig& cfg,
                                   const std::string& id) {
  std::vector<RadioMap> members;
  for (int j = 0;; ++j) {
    const fs::path p = cfg.out_dir / "recon" / id /
                       ("member_" + std::to_string(j) + ".png");
    if (!fs::exists(p)) break;
    members.push_back(load_gain_map(p, true));
  }
  if (members.empty())
    throw UpstreamArtifactMissing("no reconstruction members for scene " + id +
                                  "; run the reconstruct stage first");
  return members;
}

const std::set<std::string>& map_methods() {
  static const std::set<std::string> m = {"argmax", "topk_wc", "threshold_rc",
                                          "largest_blob", "ensemble"};
  return m;
}

} // namespace

// ---- config ---------------------------------------------------------------

std::string ConfigMap::get(const std::string& key,
                           const std::string& fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : it->second;
}

double ConfigMap::get_double(const std::string& key, double fallback) const {
  const auto it = values.find(key);
  return it == values.end() ? fallback : parse_double(it->second, key);
}

int ConfigMap::get_int(const std::string& key, int fallback) const {
  const double v = get_double(key, fallback);
  const int i = static_cast<int>(std::llround(v));
  if (static_cast<double>(i) != v)
    throw ConfigInvalid("expected an integer for " + key);
  return i;
}

std::uint64_t ConfigMap::get_u64(const std::string& key,
                                 std::uint64_t fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument(it->second);
    return v;
  } catch (const std::exception&) {
    throw ConfigInvalid("expected an unsigned integer for " + key);
  }
}

bool ConfigMap::get_bool(const std::string& key, bool fallback) const {
  const auto it = values.find(key);
  if (it == values.end()) return fallback;
  const std::string& v = it->second;
  if (v == "true" || v == "on" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "off" || v == "0" || v == "no") return false;
  throw ConfigInvalid("expected a boolean for " + key + ", got '" + v + "'");
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap cfg;
  std::string section;
  int line_no = 0;
  for (const auto& raw_line : split_lines(text)) {
    ++line_no;
    const std::string line = trim(raw_line);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3)
        throw ConfigInvalid("malformed section header at line " +
                            std::to_string(line_no));
      section = trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigInvalid("expected key=value at line " +
                          std::to_string(line_no));
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty())
      throw ConfigInvalid("empty key at line " + std::to_string(line_no));
    if (section.empty())
      throw ConfigInvalid("key '" + key + "' appears before any [section]");
    cfg.set(section + "." + key, value);
  }
  return cfg;
}

ConfigMap load_config_file(const fs::path& path) {
  if (!fs::exists(path))
    throw FileNotFound("config file not found: " + path.string());
  return parse_config_text(read_text_file(path));
}

void apply_override(ConfigMap& cfg, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigInvalid("override must look like section.key=value: " +
                        assignment);
  const std::string key = trim(assignment.substr(0, eq));
  if (key.find('.') == std::string::npos)
    throw ConfigInvalid("override key must be section-qualified: " + key);
  cfg.set(key, trim(assignment.substr(eq + 1)));
}

std::string canonical_config_text(const ConfigMap& cfg) {
  std::string out;
  for (const auto& [key, value] : cfg.values) {
    out += key;
    out += '=';
    out += value;
    out += '\n';
  }
  return out;
}

std::uint64_t config_hash(const ConfigMap& cfg) {
  // FNV-1a over the canonical serialization.
  const std::string text = canonical_config_text(cfg);
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

ExperimentConfig resolve_config(const ConfigMap& raw) {
  for (const auto& [key, value] : raw.values)
    if (!known_keys().count(key))
      throw ConfigInvalid("unknown config key '" + key + "'");

  ExperimentConfig cfg;
  cfg.raw = raw;

  cfg.scene_source = raw.get("scenes.source", cfg.scene_source);
  cfg.restricted = raw.get("scenes.restricted", cfg.restricted);
  cfg.grid_size = raw.get_int("scenes.grid_size", cfg.grid_size);
  cfg.buildings_min = raw.get_int("scenes.buildings_min", cfg.buildings_min);
  cfg.buildings_max = raw.get_int("scenes.buildings_max", cfg.buildings_max);
  cfg.train_count = raw.get_int("scenes.train_count", cfg.train_count);
  cfg.test_count = raw.get_int("scenes.test_count", cfg.test_count);
  cfg.cell_size = raw.get_double("scenes.cell_size", cfg.cell_size);
  cfg.building_height =
      raw.get_double("scenes.building_height", cfg.building_height);
  cfg.antenna_height =
      raw.get_double("scenes.antenna_height", cfg.antenna_height);
  cfg.gain_db_min = raw.get_double("scenes.gain_db_min", cfg.gain_db_min);
  cfg.gain_db_max = raw.get_double("scenes.gain_db_max", cfg.gain_db_max);

  cfg.frequency_hz =
      raw.get_double("propagation.frequency_hz", cfg.frequency_hz);
  cfg.tx_power_dbm =
      raw.get_double("propagation.tx_power_dbm", cfg.tx_power_dbm);
  cfg.pathloss_exponent =
      raw.get_double("propagation.pathloss_exponent", cfg.pathloss_exponent);
  cfg.noise_floor_db =
      raw.get_double("propagation.noise_floor_db", cfg.noise_floor_db);

  cfg.strategy = raw.get("sampling.strategy", cfg.strategy);
  cfg.budget = raw.get_int("sampling.budget", cfg.budget);
  cfg.random_fraction =
      raw.get_double("sampling.random_fraction", cfg.random_fraction);
  cfg.noise_std = raw.get_double("sampling.noise_std", cfg.noise_std);

  cfg.denoiser = raw.get("reconstruction.denoiser", cfg.denoiser);
  cfg.steps = raw.get_int("reconstruction.steps", cfg.steps);
  cfg.ensemble = raw.get_int("reconstruction.ensemble", cfg.ensemble);
  cfg.data_consistency =
      raw.get_bool("reconstruction.data_consistency", cfg.data_consistency);
  cfg.patch_radius =
      raw.get_int("reconstruction.patch_radius", cfg.patch_radius);
  cfg.ridge_lambda =
      raw.get_double("reconstruction.ridge_lambda", cfg.ridge_lambda);
  cfg.train_draws = raw.get_int("reconstruction.train_draws", cfg.train_draws);
  cfg.num_buckets = raw.get_int("reconstruction.num_buckets", cfg.num_buckets);
  cfg.idw_power = raw.get_double("reconstruction.idw_power", cfg.idw_power);

  if (raw.has("localization.estimators")) {
    cfg.estimators.clear();
    for (const auto& name :
         split(raw.get("localization.estimators", ""), ',')) {
      const std::string e = trim(name);
      if (!e.empty()) cfg.estimators.push_back(e);
    }
  }
  cfg.topk = raw.get_int("localization.topk", cfg.topk);
  cfg.percentile = raw.get_double("localization.percentile", cfg.percentile);
  cfg.blob_alpha = raw.get_double("localization.blob_alpha", cfg.blob_alpha);
  cfg.mbe_estimate_p0 =
      raw.get_bool("localization.mbe_estimate_p0", cfg.mbe_estimate_p0);
  cfg.model_p0_dbm =
      raw.get_double("localization.model_p0_dbm", cfg.model_p0_dbm);
  cfg.model_exponent =
      raw.get_double("localization.model_exponent", cfg.model_exponent);

  cfg.analysis_scene = raw.get("analysis.scene", cfg.analysis_scene);
  cfg.analysis_budget = raw.get_int("analysis.budget", cfg.analysis_budget);
  cfg.corr_length = raw.get_double("analysis.corr_length", cfg.corr_length);
  cfg.probe_sigma = raw.get_double("analysis.sigma", cfg.probe_sigma);
  cfg.max_probes = raw.get_int("analysis.max_probes", cfg.max_probes);

  cfg.out_dir = raw.get("run.out", cfg.out_dir.string());
  cfg.seed = raw.get_u64("run.seed", cfg.seed);
  cfg.workers = raw.get_int("run.workers", cfg.workers);
  cfg.timings = raw.get_bool("run.timings", cfg.timings);

  static const std::set<std::string> strategies = {
      "random", "edge", "vertex", "hybrid", "budget_matched_random"};
  static const std::set<std::string> denoisers = {"oracle", "ridge", "none"};
  static const std::set<std::string> estimators = {
      "argmax", "topk", "threshold", "blob", "ensemble",
      "ls",     "awls", "mbe",       "nls"};
  if (cfg.grid_size < 16)
    throw ConfigInvalid("scenes.grid_size must be at least 16");
  if (cfg.buildings_min < 0 || cfg.buildings_max < cfg.buildings_min)
    throw ConfigInvalid("building count range is invalid");
  if (cfg.train_count < 0 || cfg.test_count < 0)
    throw ConfigInvalid("split counts must be nonnegative");
  if (!strategies.count(cfg.strategy))
    throw ConfigInvalid("unknown sampling.strategy '" + cfg.strategy + "'");
  if (cfg.budget < 1) throw ConfigInvalid("sampling.budget must be positive");
  if (!(cfg.random_fraction >= 0.0) || cfg.random_fraction >= 1.0)
    throw ConfigInvalid("sampling.random_fraction must lie in [0, 1)");
  if (cfg.noise_std < 0.0)
    throw ConfigInvalid("sampling.noise_std must be nonnegative");
  if (!denoisers.count(cfg.denoiser))
    throw ConfigInvalid("unknown reconstruction.denoiser '" + cfg.denoiser +
                        "'");
  if (cfg.steps < 1) throw ConfigInvalid("reconstruction.steps must be >= 1");
  if (cfg.ensemble < 1)
    throw ConfigInvalid("reconstruction.ensemble must be >= 1");
  if (cfg.patch_radius < 0 || cfg.patch_radius > 8)
    throw ConfigInvalid("reconstruction.patch_radius must lie in [0, 8]");
  if (cfg.ridge_lambda <= 0.0)
    throw ConfigInvalid("reconstruction.ridge_lambda must be positive");
  if (cfg.train_draws < 1)
    throw ConfigInvalid("reconstruction.train_draws must be >= 1");
  if (cfg.num_buckets < 1)
    throw ConfigInvalid("reconstruction.num_buckets must be >= 1");
  if (cfg.estimators.empty())
    throw ConfigInvalid("localization.estimators must name at least one");
  for (const auto& e : cfg.estimators)
    if (!estimators.count(e))
      throw ConfigInvalid("unknown estimator '" + e + "'");
  if (cfg.topk < 1) throw ConfigInvalid("localization.topk must be >= 1");
  if (!(cfg.percentile >= 0.0) || !(cfg.percentile <= 100.0))
    throw ConfigInvalid("localization.percentile must lie in [0, 100]");
  if (!(cfg.blob_alpha > 0.0) || cfg.blob_alpha > 1.0)
    throw ConfigInvalid("localization.blob_alpha must lie in (0, 1]");
  if (cfg.analysis_budget < 1)
    throw ConfigInvalid("analysis.budget must be >= 1");
  if (cfg.corr_length <= 0.0)
    throw ConfigInvalid("analysis.corr_length must be positive");
  if (cfg.probe_sigma <= 0.0)
    throw ConfigInvalid("analysis.sigma must be positive");
  if (cfg.max_probes < 2)
    throw ConfigInvalid("analysis.max_probes must be >= 2");
  if (cfg.workers < 1) throw ConfigInvalid("run.workers must be >= 1");
  if (cfg.cell_size <= 0.0)
    throw ConfigInvalid("scenes.cell_size must be positive");
  if (!(cfg.gain_db_max > cfg.gain_db_min))
    throw ConfigInvalid("scenes.gain_db_max must exceed gain_db_min");
  return cfg;
}

// ---- stages ---------------------------------------------------------------

std::string cmd_synth(const ExperimentConfig& cfg) {
  if (cfg.scene_source != "synthetic")
    throw ConfigInvalid("synth requires scenes.source = synthetic");
  const std::size_t total =
      static_cast<std::size_t>(cfg.train_count) + cfg.test_count;
  if (total == 0) throw ConfigInvalid("train_count + test_count must be > 0");

  const fs::path dir = cfg.out_dir / "scenes";
  const PropagationParams params = params_of(cfg);
  std::vector<GridPoint> tx(total);
  std::vector<std::string> ids(total);

  parallel_for(total, cfg.workers, [&](std::size_t i) {
    char name[32];
    std::snprintf(name, sizeof(name), "scene_%04zu", i);
    SceneRecord rec;
    // A handful of deterministic retries absorbs rare placement failures.
    for (int attempt = 0;; ++attempt) {
      try {
        rec = generate_synthetic_scene(
            cfg.grid_size, cfg.buildings_min, cfg.buildings_max, params,
            derive_seed(cfg.seed, stream_tag("synth"), i * 8 + attempt));
        break;
      } catch (const PlacementFailure&) {
        if (attempt >= 7) throw;
      }
    }
    rec.id = name;
    save_scene(dir, rec);
    tx[i] = rec.tx;
    ids[i] = name;
  });

  const auto splits =
      split_manifest(total, static_cast<std::size_t>(cfg.train_count),
                     static_cast<std::size_t>(cfg.test_count),
                     derive_seed(cfg.seed, stream_tag("split"), 0));
  std::vector<ManifestRow> rows(total);
  for (std::size_t i = 0; i < total; ++i) rows[i] = {ids[i], tx[i], splits[i]};
  save_manifest(dir / "manifest.csv", rows);
  append_run_manifest(cfg, "synth");
  return "synthesized " + std::to_string(total) + " scenes into " +
         dir.string() + "\n";
}

std::string cmd_sample(const ExperimentConfig& cfg) {
  const auto rows = load_scene_manifest(cfg);
  parallel_for(rows.size(), cfg.workers, [&](std::size_t i) {
    const ManifestRow& row = rows[i];
    const EnvironmentGrid env = load_env_for(cfg, row.scene_id);
    const RadioMap truth = truth_db_map(cfg, env, row);
    const SamplingMask mask = build_mask(cfg, env, i);
    const MeasurementSet meas = sample_rss(
        truth, mask, cfg.noise_std, derive_seed(cfg.seed, stream_tag("noise"), i));
    const fs::path dir = cfg.out_dir / "samples" / row.scene_id;
    save_mask_text(mask, dir / "mask.txt");
    save_mask_pgm(mask, env.size(), dir / "mask.pgm");
    save_measurements(meas, dir / "measurements.csv");
  });
  append_run_manifest(cfg, "sample");
  return "sampled " + std::to_string(rows.size()) + " scenes with strategy " +
         cfg.strategy + "\n";
}

std::string cmd_train(const ExperimentConfig& cfg) {
  const auto all = load_scene_manifest(cfg);
  const auto rows = rows_of_split(all, "train");
  if (rows.empty()) throw ConfigInvalid("manifest holds no train scenes");
  require_artifact(cfg.out_dir / "samples", "sample");

  std::vector<TrainingScene> data(rows.size());
  parallel_for(rows.size(), cfg.workers, [&](std::size_t i) {
    const ManifestRow& row = rows[i];
    const EnvironmentGrid env = load_env_for(cfg, row.scene_id);
    TrainingScene scene;
    scene.cond = condition_for(cfg, env, row.scene_id);
    scene.x0 = normalize_radio_map(truth_db_map(cfg, env, row)).values;
    data[i] = std::move(scene);
  });

  const RidgeDenoiserModel model = train_ridge_denoiser(
      data, cfg.patch_radius, cfg.ridge_lambda,
      derive_seed(cfg.seed, stream_tag("train"), 0), cfg.train_draws,
      cfg.num_buckets);
  model.save(cfg.out_dir / "model" / "ridge.bin");
  append_run_manifest(cfg, "train");
  return "trained ridge denoiser on " + std::to_string(rows.size()) +
         " scenes\n";
}

std::string cmd_reconstruct(const ExperimentConfig& cfg) {
  const auto all = load_scene_manifest(cfg);
  const auto rows = rows_of_split(all, "test");
  if (rows.empty()) throw ConfigInvalid("manifest holds no test scenes");
  require_artifact(cfg.out_dir / "samples", "sample");

  RidgeDenoiserModel model;
  if (cfg.denoiser == "ridge") {
    const fs::path model_path = cfg.out_dir / "model" / "ridge.bin";
    require_artifact(model_path, "train");
    model = RidgeDenoiserModel::load(model_path);
  }

  parallel_for(rows.size(), cfg.workers, [&](std::size_t i) {
    const ManifestRow& row = rows[i];
    const EnvironmentGrid env = load_env_for(cfg, row.scene_id);
    const ConditionTensor cond = condition_for(cfg, env, row.scene_id);
    std::vector<RadioMap> members;
    if (cfg.denoiser == "none") {
      members.push_back(idw_reconstruct(cond, cfg.idw_power));
    } else {
      const DiffusionSchedule schedule = DiffusionSchedule::uniform(cfg.steps);
      const std::uint64_t seed =
          derive_seed(cfg.seed, stream_tag("recon"), i);
      if (cfg.denoiser == "oracle") {
        const FieldGrid x0 =
            normalize_radio_map(truth_db_map(cfg, env, row)).values;
        members = reconstruct_rm(cond, OracleDenoiser(x0), schedule,
                                 cfg.ensemble, seed, cfg.data_consistency);
      } else {
        members = reconstruct_rm(cond, RidgeDenoiser(model, cond), schedule,
                                 cfg.ensemble, seed, cfg.data_consistency);
      }
    }
    const fs::path dir = cfg.out_dir / "recon" / row.scene_id;
    FieldGrid mean = FieldGrid::Zero(env.size(), env.size());
    for (std::size_t j = 0; j < members.size(); ++j) {
      save_gain_map(members[j],
                    dir / ("member_" + std::to_string(j) + ".png"));
      mean += members[j].values;
    }
    RadioMap fused;
    fused.values = mean / static_cast<double>(members.size());
    fused.normalized = true;
    save_gain_map(fused, dir / "recon.png");
  });
  append_run_manifest(cfg, "reconstruct");
  return "reconstructed " + std::to_string(rows.size()) + " scenes with " +
         cfg.denoiser + " denoiser\n";
}

std::string cmd_localize(const ExperimentConfig& cfg) {
  const auto all = load_scene_manifest(cfg);
  const auto rows = rows_of_split(all, "test");
  if (rows.empty()) throw ConfigInvalid("manifest holds no test scenes");

  bool wants_map = false, wants_classical = false;
  for (const auto& e : cfg.estimators) {
    if (e == "ls" || e == "awls" || e == "mbe" || e == "nls")
      wants_classical = true;
    else
      wants_map = true;
  }
  if (wants_map) require_artifact(cfg.out_dir / "recon", "reconstruct");
  if (wants_classical) require_artifact(cfg.out_dir / "samples", "sample");

  const PathlossModel model = model_of(cfg);

  struct OutRow {
    std::string method;
    double row, col, le, ms;
  };
  std::vector<std::vector<OutRow>> results(rows.size());

  parallel_for(rows.size(), cfg.workers, [&](std::size_t i) {
    const ManifestRow& row = rows[i];
    const EnvironmentGrid env = load_env_for(cfg, row.scene_id);
    const MaskGrid region = restricted_free_region(env);

    RadioMap recon;
    bool have_recon = false;
    std::vector<RadioMap> members;
    MeasurementSet meas;
    bool have_meas = false;

    for (const auto& name : cfg.estimators) {
      const auto started = std::chrono::steady_clock::now();
      Estimate est;
      if (name == "ls" || name == "awls" || name == "mbe" || name == "nls") {
        if (!have_meas) {
          meas = load_measurements(
              cfg.out_dir / "samples" / row.scene_id / "measurements.csv",
              cfg.noise_std);
          have_meas = true;
        }
        if (name == "ls") est = ls_localize(meas, model, cfg.cell_size);
        if (name == "awls") est = awls_localize(meas, model, cfg.cell_size);
        if (name == "mbe")
          est = mbe_localize(meas, model, env.free_restricted_cells(),
                             cfg.noise_std, cfg.cell_size,
                             cfg.mbe_estimate_p0);
        if (name == "nls") est = nls_localize(meas, model, env);
      } else if (name == "ensemble") {
        if (members.empty()) members = load_members(cfg, row.scene_id);
        std::vector<Estimate> picks;
        picks.reserve(members.size());
        for (const auto& m : members)
          picks.push_back(argmax_localize(m, region));
        est = ensemble_localize(picks);
      } else {
        if (!have_recon) {
          const fs::path p =
              cfg.out_dir / "recon" / row.scene_id / "recon.png";
          require_artifact(p, "reconstruct");
          recon = load_gain_map(p, true);
          have_recon = true;
        }
        if (name == "argmax") est = argmax_localize(recon, region);
        if (name == "topk") est = topk_weighted_centroid(recon, cfg.topk);
        if (name == "threshold")
          est = threshold_region_center(recon, cfg.percentile);
        if (name == "blob") est = largest_blob_centroid(recon, cfg.blob_alpha);
      }
      const double ms =
          cfg.timings
              ? std::chrono::duration<double, std::milli>(
                    std::chrono::steady_clock::now() - started)
                    .count()
              : 0.0;
      const double le = localization_error_m(est, row.tx, cfg.cell_size);
      results[i].push_back({est.method, est.row, est.col, le, ms});
    }
  });

  std::string csv = "scene_id,method,row,col,le_m,runtime_ms\r\n";
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (const auto& r : results[i]) {
      csv += rows[i].scene_id;
      csv += ',';
      csv += r.method;
      csv += ',';
      csv += format_num(r.row);
      csv += ',';
      csv += format_num(r.col);
      csv += ',';
      csv += format_num(r.le);
      csv += ',';
      csv += format_num(r.ms);
      csv += "\r\n";
    }
  write_file_atomic(cfg.out_dir / "estimates.csv", csv);
  append_run_manifest(cfg, "localize");
  return "localized " + std::to_string(rows.size()) + " scenes with " +
         std::to_string(cfg.estimators.size()) + " estimators\n";
}

std::string cmd_evaluate(const ExperimentConfig& cfg) {
  const fs::path est_path = cfg.out_dir / "estimates.csv";
  require_artifact(est_path, "localize");
  const auto manifest = load_scene_manifest(cfg);
  std::map<std::string, GridPoint> tx_of;
  for (const auto& row : manifest) tx_of[row.scene_id] = row.tx;

  struct EstRow {
    std::string scene_id, method;
    double row, col;
  };
  std::vector<EstRow> est_rows;
  {
    const auto lines = split_lines(read_text_file(est_path));
    if (lines.empty() || lines[0] != "scene_id,method,row,col,le_m,runtime_ms")
      throw ConfigInvalid("malformed estimates file " + est_path.string());
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      const auto f = split(lines[i], ',');
      if (f.size() != 6)
        throw ConfigInvalid("malformed estimates file " + est_path.string());
      est_rows.push_back({f[0], f[1], parse_double(f[2], "row"),
                          parse_double(f[3], "col")});
    }
  }

  // Per-scene reconstruction metrics and sampling ratio, computed once.
  struct SceneStats {
    double mse, rmse, nmse, ssim, psnr;
    bool have_map = false;
    double ratio = std::numeric_limits<double>::quiet_NaN();
  };
  std::map<std::string, SceneStats> stats;
  for (const auto& er : est_rows) {
    if (stats.count(er.scene_id)) continue;
    if (!tx_of.count(er.scene_id))
      throw ConfigInvalid("estimates reference unknown scene " + er.scene_id);
    SceneStats s;
    const EnvironmentGrid env = load_env_for(cfg, er.scene_id);
    const fs::path mask_path =
        cfg.out_dir / "samples" / er.scene_id / "mask.txt";
    require_artifact(mask_path, "sample");
    const SamplingMask mask = load_mask_text(mask_path);
    s.ratio = static_cast<double>(mask.points.size()) /
              static_cast<double>(env.free_cells().size());
    const fs::path recon_path =
        cfg.out_dir / "recon" / er.scene_id / "recon.png";
    const fs::path truth_path =
        scenes_dir_of(cfg) / er.scene_id / "gain_tx0.png";
    if (fs::exists(recon_path) && fs::exists(truth_path)) {
      const RadioMap recon = load_gain_map(recon_path, true);
      const RadioMap truth = load_gain_map(truth_path, true);
      s.mse = mse(recon.values, truth.values);
      s.rmse = rmse(recon.values, truth.values);
      s.nmse = nmse(recon.values, truth.values);
      s.ssim = ssim(recon.values, truth.values);
      s.psnr = psnr(recon.values, truth.values);
      s.have_map = true;
    }
    stats[er.scene_id] = s;
  }

  std::vector<MetricRow> rows;
  for (const auto& er : est_rows) {
    const SceneStats& s = stats.at(er.scene_id);
    MetricRow row;
    row.scene_id = er.scene_id;
    row.method = er.method;
    Estimate est;
    est.row = er.row;
    est.col = er.col;
    row.le_m = localization_error_m(est, tx_of.at(er.scene_id), cfg.cell_size);
    row.sampling_ratio = s.ratio;
    if (s.have_map && map_methods().count(er.method)) {
      row.mse = s.mse;
      row.rmse = s.rmse;
      row.nmse = s.nmse;
      row.ssim = s.ssim;
      row.psnr = s.psnr;
    }
    rows.push_back(std::move(row));
  }

  const auto summaries = summarize_metrics(rows);
  const std::string table = format_summary_table(summaries);
  write_file_atomic(cfg.out_dir / "eval" / "metrics.csv",
                    metrics_to_csv(rows));
  write_file_atomic(cfg.out_dir / "eval" / "summary.txt", table);
  append_run_manifest(cfg, "evaluate");
  return table;
}

std::string cmd_analyze_sampling(const ExperimentConfig& cfg) {
  const auto manifest = load_scene_manifest(cfg);
  const std::string id =
      cfg.analysis_scene.empty() ? manifest.front().scene_id
                                 : cfg.analysis_scene;
  const ManifestRow* row = nullptr;
  for (const auto& r : manifest)
    if (r.scene_id == id) row = &r;
  if (!row) throw ConfigInvalid("analysis.scene '" + id + "' not in manifest");

  const EnvironmentGrid env = load_env_for(cfg, id);
  const int n = env.size();

  // Longest horizontal building face with free space on its sensing side.
  int best_r = -1, best_c = -1, best_len = 0;
  for (int r = 1; r < n; ++r) {
    int c = 0;
    while (c < n) {
      if (env.occupancy(r, c) && !env.occupancy(r - 1, c)) {
        int start = c;
        while (c < n && env.occupancy(r, c) && !env.occupancy(r - 1, c)) ++c;
        if (c - start > best_len) {
          best_len = c - start;
          best_r = r;
          best_c = start;
        }
      } else {
        ++c;
      }
    }
  }
  if (best_len == 0)
    throw InvalidGeometry("scene has no horizontal building face to analyze");

  const double cell = cfg.cell_size;
  std::vector<EdgeSegment> segments(static_cast<std::size_t>(best_len));
  for (int j = 0; j < best_len; ++j) {
    segments[j].s = (j + 0.5) * cell;
    segments[j].ds = cell;
    segments[j].center = {best_r * cell, (best_c + j + 0.5) * cell};
  }

  const auto sensing = env.free_sensing_cells();
  if (sensing.empty())
    throw InvalidGeometry("scene has no free sensing cells");
  const std::size_t stride =
      std::max<std::size_t>(1, sensing.size() /
                                   static_cast<std::size_t>(cfg.max_probes));
  std::vector<GridPoint> probe_cells;
  for (std::size_t k = 0; k < sensing.size() &&
                          probe_cells.size() <
                              static_cast<std::size_t>(cfg.max_probes);
       k += stride)
    probe_cells.push_back(sensing[k]);
  std::vector<Vec2> probes;
  probes.reserve(probe_cells.size());
  for (const auto& p : probe_cells)
    probes.push_back({(p.row + 0.5) * cell, (p.col + 0.5) * cell});

  const PropagationParams params = params_of(cfg);
  const Vec2 source{(row->tx.row + 0.5) * cell, (row->tx.col + 0.5) * cell};
  const EdgeDiscretization disc = build_edge_discretization(
      segments, probes, source, {0.0, 1.0}, params.wavelength(),
      cfg.probe_sigma, cfg.corr_length);

  const Eigen::MatrixXcd J = fisher_information(disc.K, disc.sigma);
  const double mi_all = mutual_information(disc.K, disc.prior, disc.sigma);
  const int budget =
      std::min(cfg.analysis_budget, static_cast<int>(probes.size()));
  const GreedyPlacement greedy = greedy_probe_placement(disc, budget);

  std::ostringstream out;
  out << "edge analysis for scene " << id << "\n";
  out << "face: row " << best_r << ", columns [" << best_c << ", "
      << best_c + best_len << "), " << best_len << " segments, "
      << probes.size() << " probes\n";
  out << "mutual information, all probes: " << format_num(mi_all)
      << " nats\n";
  out << "fisher diagonal per segment:\n";
  for (std::size_t j = 0; j < segments.size(); ++j)
    out << "  segment " << j << " s=" << format_num(segments[j].s)
        << " J=" << format_num(J(j, j).real()) << "\n";
  out << "greedy placement (budget " << budget << "):\n";
  double cumulative = 0.0;
  for (std::size_t k = 0; k < greedy.order.size(); ++k) {
    const GridPoint& p = probe_cells[static_cast<std::size_t>(greedy.order[k])];
    cumulative += greedy.gains[k];
    out << "  step " << k + 1 << ": probe " << greedy.order[k] << " at ("
        << p.row << "," << p.col << ") gain " << format_num(greedy.gains[k])
        << " nats, total " << format_num(cumulative) << "\n";
  }
  const std::string text = out.str();
  write_file_atomic(cfg.out_dir / "analysis" / "sampling_report.txt", text);
  append_run_manifest(cfg, "analyze-sampling");
  return text;
}

std::string run_stage(const std::string& stage, const ExperimentConfig& cfg) {
  if (stage == "synth") return cmd_synth(cfg);
  if (stage == "sample") return cmd_sample(cfg);
  if (stage == "train") return cmd_train(cfg);
  if (stage == "reconstruct") return cmd_reconstruct(cfg);
  if (stage == "localize") return cmd_localize(cfg);
  if (stage == "evaluate") return cmd_evaluate(cfg);
  if (stage == "analyze-sampling") return cmd_analyze_sampling(cfg);
  throw ConfigInvalid("unknown stage '" + stage + "'");
}

} // namespace nlosloc
