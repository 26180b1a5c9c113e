// SPDX-License-Identifier: Apache-2.0
//
// Grid geometry: edge/vertex extraction, supercover line traversal,
// obstruction tracing, environment validation.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <set>

#include "nlosloc/geometry.hpp"
#include "nlosloc/rng.hpp"
#include "oracles.hpp"

using namespace nlosloc;

namespace {

EnvironmentGrid env_of(int n, const std::vector<GridPoint>& buildings) {
  MaskGrid occ = MaskGrid::Zero(n, n);
  for (const auto& p : buildings) occ(p.row, p.col) = 1;
  return make_environment(occ);
}

EnvironmentGrid env_with_rect(int n, int r0, int c0, int r1, int c1) {
  MaskGrid occ = MaskGrid::Zero(n, n);
  for (int r = r0; r <= r1; ++r)
    for (int c = c0; c <= c1; ++c) occ(r, c) = 1;
  return make_environment(occ);
}

std::set<GridPoint> as_set(const std::vector<GridPoint>& v) {
  return {v.begin(), v.end()};
}

} // namespace

TEST_CASE("extract_edges on an open grid is empty") {
  CHECK(extract_edges(env_of(8, {})).empty());
}

TEST_CASE("extract_edges around a single cell gives its 4-neighborhood") {
  const auto edges = extract_edges(env_of(8, {{4, 4}}));
  const std::vector<GridPoint> expected{{3, 4}, {4, 3}, {4, 5}, {5, 4}};
  CHECK(edges == expected); // row-major sorted
}

TEST_CASE("extract_edges around a centered 3x3 block gives 12 cells") {
  const auto env = env_with_rect(9, 3, 3, 5, 5);
  const auto edges = extract_edges(env);
  CHECK(edges.size() == 12);
  for (const auto& p : edges) {
    CHECK_FALSE(env.occupied(p));
    bool adjacent = false;
    const int dr[] = {-1, 1, 0, 0}, dc[] = {0, 0, -1, 1};
    for (int k = 0; k < 4; ++k) {
      const GridPoint q{p.row + dr[k], p.col + dc[k]};
      if (env.in_bounds(q) && env.occupied(q)) adjacent = true;
    }
    CHECK(adjacent);
  }
}

TEST_CASE("extract_vertices on an open grid is empty") {
  CHECK(extract_vertices(env_of(10, {})).empty());
}

TEST_CASE("extract_vertices marks the 4 outward diagonals of a rectangle") {
  const auto verts = extract_vertices(env_with_rect(10, 4, 3, 6, 5));
  const std::set<GridPoint> expected{{3, 2}, {3, 6}, {7, 2}, {7, 6}};
  CHECK(as_set(verts) == expected);
}

TEST_CASE("extract_vertices on an L-shape finds 5 convex + 1 concave") {
  MaskGrid occ = MaskGrid::Zero(12, 12);
  for (int r = 3; r <= 6; ++r)
    for (int c = 3; c <= 4; ++c) occ(r, c) = 1;
  for (int r = 5; r <= 6; ++r)
    for (int c = 5; c <= 7; ++c) occ(r, c) = 1;
  const auto verts = extract_vertices(make_environment(occ));
  const std::set<GridPoint> expected{{2, 2}, {2, 5}, {4, 5},
                                     {4, 8}, {7, 2}, {7, 8}};
  CHECK(as_set(verts) == expected);
}

TEST_CASE("vertex count never exceeds edge count") {
  for (std::uint64_t seed = 1; seed <= 30; ++seed) {
    Rng rng(seed);
    MaskGrid occ = MaskGrid::Zero(16, 16);
    for (int r = 0; r < 16; ++r)
      for (int c = 0; c < 16; ++c) occ(r, c) = rng.uniform() < 0.25 ? 1 : 0;
    occ(8, 8) = 0; // keep at least one free cell
    const auto env = make_environment(occ);
    const auto edges = extract_edges(env);
    const auto verts = extract_vertices(env);
    CHECK(verts.size() <= edges.size());
    for (const auto& p : edges) CHECK(env.is_free(p));
    for (const auto& p : verts) CHECK(env.is_free(p));
  }
}

TEST_CASE("edge and vertex extraction commute with translation") {
  const auto shift = [](const std::vector<GridPoint>& pts, int dr, int dc) {
    std::set<GridPoint> out;
    for (const auto& p : pts) out.insert({p.row + dr, p.col + dc});
    return out;
  };
  const auto base = env_with_rect(16, 3, 3, 5, 6);
  const auto moved = env_with_rect(16, 6, 8, 8, 11); // same 3x4 block at +3,+5
  CHECK(shift(extract_edges(base), 3, 5) == as_set(extract_edges(moved)));
  CHECK(shift(extract_vertices(base), 3, 5) ==
        as_set(extract_vertices(moved)));
}

TEST_CASE("supercover includes both cells at an exact corner crossing") {
  const auto cells = supercover_cells({0, 0}, {2, 2});
  const std::set<GridPoint> expected{{0, 0}, {1, 0}, {0, 1}, {1, 1},
                                     {2, 1}, {1, 2}, {2, 2}};
  CHECK(as_set(cells) == expected);
  CHECK(cells.front() == GridPoint{0, 0});
  CHECK(cells.back() == GridPoint{2, 2});
}

TEST_CASE("supercover of an axis-aligned line is the cell run") {
  const auto cells = supercover_cells({3, 1}, {3, 4});
  const std::vector<GridPoint> expected{{3, 1}, {3, 2}, {3, 3}, {3, 4}};
  CHECK(cells == expected);
}

TEST_CASE("trace_obstructions on a clear corridor is empty") {
  const auto env = env_of(9, {});
  const auto profile = trace_obstructions(env, {4, 0}, {4, 8});
  CHECK(profile.clear());
  CHECK(profile.total_crossed_cells == 0);
}

TEST_CASE("a wall at the midpoint splits the path symmetrically") {
  MaskGrid occ = MaskGrid::Zero(9, 9);
  occ(4, 4) = 1;
  const auto env = make_environment(occ);
  const GridPoint tx{4, 0}, rx{4, 8};
  const auto profile = trace_obstructions(env, tx, rx);
  REQUIRE(profile.segments.size() == 1);
  const auto& seg = profile.segments.front();
  CHECK(seg.entry == GridPoint{4, 4});
  CHECK(seg.exit == GridPoint{4, 4});
  CHECK(seg.height == doctest::Approx(25.0 - 1.5));
  const double d1 = distance(cell_center(tx), cell_center(seg.entry));
  const double d2 = distance(cell_center(seg.exit), cell_center(rx));
  CHECK(d1 == doctest::Approx(d2));
}

TEST_CASE("trace direction reversal swaps the segment endpoints") {
  MaskGrid occ = MaskGrid::Zero(9, 9);
  occ(4, 3) = occ(4, 4) = occ(4, 5) = 1;
  const auto env = make_environment(occ);
  const auto fwd = trace_obstructions(env, {4, 0}, {4, 8});
  const auto bwd = trace_obstructions(env, {4, 8}, {4, 0});
  REQUIRE(fwd.segments.size() == 1);
  REQUIRE(bwd.segments.size() == 1);
  CHECK(fwd.segments[0].entry == bwd.segments[0].exit);
  CHECK(fwd.segments[0].exit == bwd.segments[0].entry);
  CHECK(fwd.total_crossed_cells == bwd.total_crossed_cells);
}

TEST_CASE("a diagonal path cannot slip between corner-touching buildings") {
  MaskGrid occ = MaskGrid::Zero(3, 3);
  occ(0, 1) = occ(1, 0) = 1;
  const auto env = make_environment(occ);
  const auto profile = trace_obstructions(env, {0, 0}, {1, 1});
  CHECK_FALSE(profile.clear());
  CHECK(profile.total_crossed_cells == 2);
}

TEST_CASE("trace rejects occupied or out-of-range endpoints") {
  const auto env = env_of(8, {{4, 4}});
  CHECK_THROWS_AS(trace_obstructions(env, {4, 4}, {0, 0}), TxInsideBuilding);
  CHECK_THROWS_AS(trace_obstructions(env, {0, 0}, {4, 4}), RxInsideBuilding);
  CHECK_THROWS_AS(trace_obstructions(env, {-1, 0}, {0, 0}), OutOfBounds);
  CHECK_THROWS_AS(trace_obstructions(env, {0, 0}, {0, 8}), OutOfBounds);
}

TEST_CASE("make_environment labels upper rows sensing, lower restricted") {
  const auto env = env_of(8, {{2, 2}, {6, 6}});
  for (int r = 0; r < 8; ++r)
    for (int c = 0; c < 8; ++c) {
      const GridPoint p{r, c};
      if (env.occupied(p)) {
        CHECK_FALSE(env.restricted(p));
        CHECK_FALSE(env.sensing(p));
      } else if (r >= 4) {
        CHECK(env.restricted(p));
      } else {
        CHECK(env.sensing(p));
      }
    }
  CHECK(env.free_cells().size() == 62);
  CHECK(env.free_restricted_cells().size() == 31);
  CHECK(env.free_sensing_cells().size() == 31);
}

TEST_CASE("free_cells is row-major ordered") {
  const auto cells = env_of(6, {{0, 0}}).free_cells();
  CHECK(std::is_sorted(cells.begin(), cells.end()));
  CHECK(cells.front() == GridPoint{0, 1});
}

TEST_CASE("validate enforces the environment invariants") {
  auto env = env_of(6, {{2, 2}});

  SUBCASE("zero antenna height is allowed") {
    env.antenna_height = 0.0;
    CHECK_NOTHROW(env.validate());
  }
  SUBCASE("negative antenna height is rejected") {
    env.antenna_height = -0.1;
    CHECK_THROWS_AS(env.validate(), InvalidEnvironment);
  }
  SUBCASE("antenna at or above the roofline is rejected") {
    env.antenna_height = env.building_height;
    CHECK_THROWS_AS(env.validate(), InvalidEnvironment);
  }
  SUBCASE("non-positive cell size is rejected") {
    env.cell_size = 0.0;
    CHECK_THROWS_AS(env.validate(), InvalidEnvironment);
  }
  SUBCASE("mask shape mismatch is rejected") {
    env.sensing_mask = MaskGrid::Zero(5, 5);
    CHECK_THROWS_AS(env.validate(), BadShape);
  }
  SUBCASE("non-square occupancy is rejected") {
    env.occupancy = MaskGrid::Zero(4, 6);
    CHECK_THROWS_AS(env.validate(), BadShape);
  }
  SUBCASE("region label on a building cell is rejected") {
    env.sensing_mask(2, 2) = 1;
    CHECK_THROWS_AS(env.validate(), InvalidEnvironment);
  }
  SUBCASE("overlapping region labels are rejected") {
    env.restricted_mask(0, 0) = 1; // (0,0) already sensing
    CHECK_THROWS_AS(env.validate(), InvalidEnvironment);
  }
  SUBCASE("an unlabeled free cell is rejected") {
    env.sensing_mask(0, 0) = 0;
    CHECK_THROWS_AS(env.validate(), InvalidEnvironment);
  }
  SUBCASE("fully occupied grid is rejected") {
    MaskGrid occ = MaskGrid::Constant(4, 4, 1);
    EnvironmentGrid full;
    full.occupancy = occ;
    full.restricted_mask = MaskGrid::Zero(4, 4);
    full.sensing_mask = MaskGrid::Zero(4, 4);
    CHECK_THROWS_AS(full.validate(), InvalidEnvironment);
  }
}
