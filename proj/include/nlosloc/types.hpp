// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <compare>
#include <cstdint>
#include <vector>

#include "nlosloc/errors.hpp"

namespace nlosloc {

// Dense real field over the grid, indexed (row, col).
using FieldGrid =
    Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
// Binary grid (0/1), indexed (row, col).
using MaskGrid =
    Eigen::Array<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Integer cell address. Ordering is lexicographic (row, then col) so that
// sorted containers of cells have one deterministic layout.
struct GridPoint {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const GridPoint&, const GridPoint&) = default;
};

// Continuous 2-D point. Used both for cell-space positions (row, col as
// reals) and metric-space positions; the meaning is stated at each use site.
struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Center of a cell in continuous cell units.
inline Vec2 cell_center(const GridPoint& p) {
  return {p.row + 0.5, p.col + 0.5};
}

} // namespace nlosloc
