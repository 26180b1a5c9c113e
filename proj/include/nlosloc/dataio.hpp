// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "nlosloc/geometry.hpp"
#include "nlosloc/propagation.hpp"

namespace nlosloc {

// Writes to "<path>.tmp" then renames, so readers never observe a partial
// file. Throws WriteFailure.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes);

// One scene: environment, emitter cell, and (when available) the dB-domain
// ground truth map. source tags where the scene came from
// ("synthetic" | "dataset").
struct SceneRecord {
  std::string id;
  EnvironmentGrid env;
  GridPoint tx{-1, -1};
  RadioMap ground_truth;
  bool has_truth = false;
  std::string source = "synthetic";
};

struct ManifestRow {
  std::string scene_id;
  GridPoint tx{-1, -1};
  std::string split;
};

// 8-bit grayscale PNG -> occupancy grid, pixel >= 128 = building. The
// default partition (lower half restricted / upper half sensing) is applied.
// Maps must be 256x256 unless any_size is set.
EnvironmentGrid load_building_map(const std::filesystem::path& path,
                                  bool any_size = false,
                                  double cell_size = 1.0,
                                  double building_height = 25.0,
                                  double antenna_height = 1.5);

// Occupancy -> 8-bit grayscale PNG (building = 255, free = 0). Lossless
// round trip with load_building_map.
void save_building_map(const EnvironmentGrid& env,
                       const std::filesystem::path& path);

// 8-bit grayscale PNG -> normalized gain map (pixel / 255).
RadioMap load_gain_map(const std::filesystem::path& path,
                       bool any_size = false);

// Normalized gain map -> 8-bit grayscale PNG (round(v * 255)). Quantization
// error is at most 1/510 per cell.
void save_gain_map(const RadioMap& rm, const std::filesystem::path& path);

// Maps a normalized [0, 1] gain image onto a dB scale via the affine
// v -> db_min + v * (db_max - db_min); adapter for dataset-sourced scenes
// whose raw dB fields are not on disk.
RadioMap denormalize_gain(const RadioMap& rm, double db_min, double db_max);

// Random rectangles (side 2 .. max(2, n/8)), pairwise disjoint, rejection
// sampled with up to 1000 attempts per rectangle; PlacementFailure when a
// rectangle or the emitter cannot be placed. The emitter is drawn uniformly
// from free restricted cells and the ground truth is synthesized with
// `params`.
SceneRecord generate_synthetic_scene(int n, int buildings_min,
                                     int buildings_max,
                                     const PropagationParams& params,
                                     std::uint64_t seed);

// Deterministic shuffle + partition into "train" / "test" / "unused".
// train_count + test_count must not exceed the record count.
std::vector<std::string> split_manifest(std::size_t record_count,
                                        std::size_t train_count,
                                        std::size_t test_count,
                                        std::uint64_t seed);

// Scene directory layout: <scenes_dir>/<id>/building.png and gain_tx0.png
// (the gain image is the normalized ground truth when present).
void save_scene(const std::filesystem::path& scenes_dir,
                const SceneRecord& rec);
SceneRecord load_scene(const std::filesystem::path& scenes_dir,
                       const std::string& id, const GridPoint& tx,
                       bool any_size = true);

// manifest.csv: scene_id,tx_row,tx_col,split (RFC-4180, CRLF line breaks).
void save_manifest(const std::filesystem::path& path,
                   const std::vector<ManifestRow>& rows);
std::vector<ManifestRow> load_manifest(const std::filesystem::path& path);

} // namespace nlosloc
