// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <vector>

#include "nlosloc/types.hpp"

namespace nlosloc {

// Rasterized scene: square occupancy grid plus the physical scales needed by
// the propagation model and the region partition used by sampling and
// localization. restricted_mask (emitter side, no sensing allowed) and
// sensing_mask (receiver side) are disjoint subsets of free space.
struct EnvironmentGrid {
  MaskGrid occupancy;      // 1 = building cell
  double cell_size = 1.0;  // meters per cell
  double building_height = 25.0;
  double antenna_height = 1.5;
  MaskGrid restricted_mask;
  MaskGrid sensing_mask;

  int size() const { return static_cast<int>(occupancy.rows()); }
  bool in_bounds(const GridPoint& p) const {
    return p.row >= 0 && p.col >= 0 && p.row < size() && p.col < size();
  }
  bool occupied(const GridPoint& p) const {
    return occupancy(p.row, p.col) != 0;
  }
  bool is_free(const GridPoint& p) const { return !occupied(p); }
  bool restricted(const GridPoint& p) const {
    return restricted_mask(p.row, p.col) != 0;
  }
  bool sensing(const GridPoint& p) const {
    return sensing_mask(p.row, p.col) != 0;
  }

  // Free cells in row-major order; the deterministic base ordering used by
  // every sampler.
  std::vector<GridPoint> free_cells() const;
  std::vector<GridPoint> free_restricted_cells() const;
  std::vector<GridPoint> free_sensing_cells() const;

  // Throws BadShape / InvalidEnvironment when an invariant fails.
  void validate() const;
};

// Builds an environment with the default split: restricted = lower half of
// the grid, sensing = upper half (both intersected with free space).
EnvironmentGrid make_environment(const MaskGrid& occupancy,
                                 double cell_size = 1.0,
                                 double building_height = 25.0,
                                 double antenna_height = 1.5);

// One contiguous run of occupied cells crossed by a line of sight.
// height is measured above the flat tx-rx sight line.
struct ObstructionSegment {
  GridPoint entry;
  GridPoint exit;
  double height = 0.0;

  friend bool operator==(const ObstructionSegment&,
                         const ObstructionSegment&) = default;
};

// Obstructions along one tx-rx path, ordered by distance from the
// transmitter. Empty segments <=> clear line of sight.
struct ObstructionProfile {
  std::vector<ObstructionSegment> segments;
  int total_crossed_cells = 0;

  bool clear() const { return segments.empty(); }
};

// Every cell touched by the segment between the two cell centers, in
// traversal order starting at `from`. Supercover: a path that passes exactly
// through a cell corner reports both adjacent cells, so no obstruction can
// be skipped diagonally.
std::vector<GridPoint> supercover_cells(const GridPoint& from,
                                        const GridPoint& to);

// Free cells 4-adjacent to at least one building cell, sorted (row, col).
std::vector<GridPoint> extract_edges(const EnvironmentGrid& env);

// Free cells diagonally adjacent to building corners, sorted (row, col).
// A 2x2 window with exactly one occupied cell (convex corner) marks the
// diagonally opposite free cell; a window with exactly three occupied cells
// (concave corner) marks its single free cell.
std::vector<GridPoint> extract_vertices(const EnvironmentGrid& env);

// Groups the occupied cells crossed by the tx-rx sight line into ordered
// segments. Throws TxInsideBuilding / RxInsideBuilding / OutOfBounds.
ObstructionProfile trace_obstructions(const EnvironmentGrid& env,
                                      const GridPoint& tx,
                                      const GridPoint& rx);

} // namespace nlosloc
