// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/geometry.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>

namespace nlosloc {

namespace {

std::vector<GridPoint> collect(const EnvironmentGrid& env, const MaskGrid* in) {
  std::vector<GridPoint> out;
  const int n = env.size();
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (env.occupancy(r, c)) continue;
      if (in && (*in)(r, c) == 0) continue;
      out.push_back({r, c});
    }
  return out;
}

} // namespace

std::vector<GridPoint> EnvironmentGrid::free_cells() const {
  return collect(*this, nullptr);
}

std::vector<GridPoint> EnvironmentGrid::free_restricted_cells() const {
  return collect(*this, &restricted_mask);
}

std::vector<GridPoint> EnvironmentGrid::free_sensing_cells() const {
  return collect(*this, &sensing_mask);
}

void EnvironmentGrid::validate() const {
  const auto n = occupancy.rows();
  if (n < 1 || occupancy.cols() != n)
    throw BadShape("occupancy grid must be square and non-empty");
  if (restricted_mask.rows() != n || restricted_mask.cols() != n ||
      sensing_mask.rows() != n || sensing_mask.cols() != n)
    throw BadShape("region masks must match the occupancy shape");
  if (cell_size <= 0.0)
    throw InvalidEnvironment("cell_size must be positive");
  if (building_height <= 0.0 || antenna_height < 0.0 ||
      antenna_height >= building_height)
    throw InvalidEnvironment(
        "heights must satisfy 0 <= antenna_height < building_height");
  if ((occupancy == 0).count() == 0)
    throw InvalidEnvironment("environment has no free cell");
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < n; ++c) {
      if (occupancy(r, c) && (restricted_mask(r, c) || sensing_mask(r, c)))
        throw InvalidEnvironment("region masks must lie in free space");
      if (restricted_mask(r, c) && sensing_mask(r, c))
        throw InvalidEnvironment("restricted and sensing regions overlap");
      if (!occupancy(r, c) && !restricted_mask(r, c) && !sensing_mask(r, c))
        throw InvalidEnvironment("every free cell needs a region label");
    }
}

EnvironmentGrid make_environment(const MaskGrid& occupancy, double cell_size,
                                 double building_height,
                                 double antenna_height) {
  EnvironmentGrid env;
  env.occupancy = occupancy;
  env.cell_size = cell_size;
  env.building_height = building_height;
  env.antenna_height = antenna_height;
  const auto n = occupancy.rows();
  env.restricted_mask = MaskGrid::Zero(n, occupancy.cols());
  env.sensing_mask = MaskGrid::Zero(n, occupancy.cols());
  for (Eigen::Index r = 0; r < n; ++r)
    for (Eigen::Index c = 0; c < occupancy.cols(); ++c) {
      if (occupancy(r, c)) continue;
      if (r >= n / 2)
        env.restricted_mask(r, c) = 1;
      else
        env.sensing_mask(r, c) = 1;
    }
  env.validate();
  return env;
}

std::vector<GridPoint> extract_edges(const EnvironmentGrid& env) {
  std::vector<GridPoint> out;
  const int n = env.size();
  static constexpr int dr[] = {-1, 1, 0, 0};
  static constexpr int dc[] = {0, 0, -1, 1};
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) {
      if (env.occupancy(r, c)) continue;
      for (int k = 0; k < 4; ++k) {
        const int rr = r + dr[k], cc = c + dc[k];
        if (rr < 0 || cc < 0 || rr >= n || cc >= n) continue;
        if (env.occupancy(rr, cc)) {
          out.push_back({r, c});
          break;
        }
      }
    }
  return out; // row-major scan is already (row, col) sorted
}

std::vector<GridPoint> extract_vertices(const EnvironmentGrid& env) {
  std::set<GridPoint> marks;
  const int n = env.size();
  for (int r = 0; r + 1 < n; ++r)
    for (int c = 0; c + 1 < n; ++c) {
      const GridPoint cells[4] = {
          {r, c}, {r, c + 1}, {r + 1, c}, {r + 1, c + 1}};
      int occ = 0;
      for (const auto& p : cells) occ += env.occupied(p);
      if (occ == 1) {
        // Convex corner: mark the cell diagonally opposite the occupied one.
        for (int k = 0; k < 4; ++k)
          if (env.occupied(cells[k])) marks.insert(cells[3 - k]);
      } else if (occ == 3) {
        // Concave corner: mark the single free cell.
        for (const auto& p : cells)
          if (env.is_free(p)) marks.insert(p);
      }
    }
  return {marks.begin(), marks.end()};
}

std::vector<GridPoint> supercover_cells(const GridPoint& from,
                                        const GridPoint& to) {
  std::vector<GridPoint> out;
  int x = from.row, y = from.col;
  const int dx = std::abs(to.row - from.row);
  const int dy = std::abs(to.col - from.col);
  const int xstep = to.row >= from.row ? 1 : -1;
  const int ystep = to.col >= from.col ? 1 : -1;
  out.push_back({x, y});
  const long ddx = 2L * dx, ddy = 2L * dy;
  if (ddx >= ddy) {
    long errorprev = dx, error = dx;
    for (int i = 0; i < dx; ++i) {
      x += xstep;
      error += ddy;
      if (error > ddx) {
        y += ystep;
        error -= ddx;
        if (error + errorprev < ddx) {
          out.push_back({x, y - ystep});
        } else if (error + errorprev > ddx) {
          out.push_back({x - xstep, y});
        } else {
          // Exact corner crossing: both side cells are touched.
          out.push_back({x, y - ystep});
          out.push_back({x - xstep, y});
        }
      }
      out.push_back({x, y});
      errorprev = error;
    }
  } else {
    long errorprev = dy, error = dy;
    for (int i = 0; i < dy; ++i) {
      y += ystep;
      error += ddx;
      if (error > ddy) {
        x += xstep;
        error -= ddy;
        if (error + errorprev < ddy) {
          out.push_back({x - xstep, y});
        } else if (error + errorprev > ddy) {
          out.push_back({x, y - ystep});
        } else {
          out.push_back({x - xstep, y});
          out.push_back({x, y - ystep});
        }
      }
      out.push_back({x, y});
      errorprev = error;
    }
  }
  return out;
}

ObstructionProfile trace_obstructions(const EnvironmentGrid& env,
                                      const GridPoint& tx,
                                      const GridPoint& rx) {
  if (!env.in_bounds(tx) || !env.in_bounds(rx))
    throw OutOfBounds("trace endpoints must lie inside the grid");
  if (env.occupied(tx)) throw TxInsideBuilding("transmitter inside building");
  if (env.occupied(rx)) throw RxInsideBuilding("receiver inside building");

  ObstructionProfile profile;
  const double height = env.building_height - env.antenna_height;
  const auto cells = supercover_cells(tx, rx);
  bool open = false;
  GridPoint entry{}, last{};
  std::set<GridPoint> crossed;
  for (const auto& cell : cells) {
    if (env.occupied(cell)) {
      crossed.insert(cell);
      if (!open) {
        open = true;
        entry = cell;
      }
      last = cell;
    } else if (open) {
      profile.segments.push_back({entry, last, height});
      open = false;
    }
  }
  if (open) profile.segments.push_back({entry, last, height});
  profile.total_crossed_cells = static_cast<int>(crossed.size());
  return profile;
}

} // namespace nlosloc
