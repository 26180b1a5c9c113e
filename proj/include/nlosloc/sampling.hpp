// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nlosloc/geometry.hpp"
#include "nlosloc/propagation.hpp"

namespace nlosloc {

// Ordered set of sensing cells chosen by one strategy. Points are unique,
// free, and inside the sensing region.
struct SamplingMask {
  std::vector<GridPoint> points;
  std::string strategy;
  std::uint64_t seed = 0;

  int budget() const { return static_cast<int>(points.size()); }
};

// RSS picked up at mask cells. raw_db always holds dBm values; normalized
// stays empty until normalize_rss fills it with unit-max linear gains.
struct MeasurementSet {
  std::vector<GridPoint> points;
  std::vector<double> raw_db;
  std::vector<double> normalized;
  double noise_std = 0.0;
  std::uint64_t seed = 0;

  bool is_normalized() const { return !normalized.empty(); }
};

// Three-channel conditioning input for reconstruction: building layout plus
// the sparse normalized RSS map twice (rss and rss_dup are identical).
struct ConditionTensor {
  FieldGrid layout;
  FieldGrid rss;
  FieldGrid rss_dup;

  int size() const { return static_cast<int>(layout.rows()); }
  std::vector<GridPoint> mask_points() const;
};

// Uniform draw of `budget` distinct free sensing cells.
SamplingMask random_mask(const EnvironmentGrid& env, int budget,
                         std::uint64_t seed);

// All building-adjacent free cells inside the sensing region.
SamplingMask edge_mask(const EnvironmentGrid& env);

// All building-corner cells inside the sensing region.
SamplingMask vertex_mask(const EnvironmentGrid& env);

// Vertex cells plus uniform random sensing cells; the random additions make
// up `random_fraction` of the final mask (rounded to the nearest count).
SamplingMask hybrid_mask(const EnvironmentGrid& env, double random_fraction,
                         std::uint64_t seed);

// Uniform random mask with the same budget as `reference`.
SamplingMask budget_matched_random(const EnvironmentGrid& env,
                                   const SamplingMask& reference,
                                   std::uint64_t seed);

// Reads the dB map at mask cells and adds i.i.d. Gaussian noise.
// The map must be un-normalized (dB domain).
MeasurementSet sample_rss(const RadioMap& rm, const SamplingMask& mask,
                          double noise_std, std::uint64_t seed);

// Unit-max normalization in the linear power domain:
// y_tilde_i = p_i / max_j p_j. Computed from dB differences quantized to
// 2^-10 dB so the result is bit-identical under any uniform dB offset of
// the raw values.
MeasurementSet normalize_rss(const MeasurementSet& m);

// Scatters normalized measurements onto the grid alongside the layout
// channel. Requires a normalized measurement set.
ConditionTensor build_condition_tensor(const EnvironmentGrid& env,
                                       const MeasurementSet& m);

// Plain text serialization: one "row,col" line per point, in mask order.
void save_mask_text(const SamplingMask& mask,
                    const std::filesystem::path& path);
SamplingMask load_mask_text(const std::filesystem::path& path);

// Binary 8-bit PGM (P5): mask cells 255, others 0.
void save_mask_pgm(const SamplingMask& mask, int grid_size,
                   const std::filesystem::path& path);

} // namespace nlosloc
