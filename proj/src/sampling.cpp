// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "nlosloc/dataio.hpp"
#include "nlosloc/rng.hpp"

namespace nlosloc {

std::vector<GridPoint> ConditionTensor::mask_points() const {
  std::vector<GridPoint> out;
  for (int r = 0; r < size(); ++r)
    for (int c = 0; c < size(); ++c)
      if (rss(r, c) > 0.0) out.push_back({r, c});
  return out;
}

namespace {

// Partial Fisher-Yates over the row-major free sensing cells; the first
// `budget` slots are the draw.
std::vector<GridPoint> draw_cells(std::vector<GridPoint> pool, int budget,
                                  Rng& rng) {
  const auto n = pool.size();
  for (int i = 0; i < budget; ++i) {
    const auto j = i + rng.uniform_index(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(budget);
  return pool;
}

SamplingMask restrict_to_sensing(const EnvironmentGrid& env,
                                 std::vector<GridPoint> cells,
                                 std::string strategy) {
  SamplingMask mask;
  mask.strategy = std::move(strategy);
  for (const auto& p : cells)
    if (env.sensing(p)) mask.points.push_back(p);
  return mask;
}

} // namespace

SamplingMask random_mask(const EnvironmentGrid& env, int budget,
                         std::uint64_t seed) {
  auto pool = env.free_sensing_cells();
  if (budget < 0 || budget > static_cast<int>(pool.size()))
    throw BudgetTooLarge("budget exceeds free sensing cell count");
  Rng rng(derive_seed(seed, stream_tag("random_mask")));
  SamplingMask mask;
  mask.strategy = "random";
  mask.seed = seed;
  mask.points = draw_cells(std::move(pool), budget, rng);
  return mask;
}

SamplingMask edge_mask(const EnvironmentGrid& env) {
  return restrict_to_sensing(env, extract_edges(env), "edge");
}

SamplingMask vertex_mask(const EnvironmentGrid& env) {
  return restrict_to_sensing(env, extract_vertices(env), "vertex");
}

SamplingMask hybrid_mask(const EnvironmentGrid& env, double random_fraction,
                         std::uint64_t seed) {
  if (!(random_fraction >= 0.0) || random_fraction >= 1.0)
    throw BudgetTooLarge("random_fraction must lie in [0, 1)");
  SamplingMask mask = vertex_mask(env);
  mask.strategy = "hybrid";
  mask.seed = seed;
  const double v = static_cast<double>(mask.points.size());
  const int additions = static_cast<int>(
      std::llround(random_fraction * v / (1.0 - random_fraction)));
  if (additions == 0) return mask;

  std::set<GridPoint> taken(mask.points.begin(), mask.points.end());
  std::vector<GridPoint> pool;
  for (const auto& p : env.free_sensing_cells())
    if (!taken.contains(p)) pool.push_back(p);
  if (additions > static_cast<int>(pool.size()))
    throw BudgetTooLarge("not enough sensing cells for the random share");
  Rng rng(derive_seed(seed, stream_tag("hybrid_mask")));
  for (const auto& p : draw_cells(std::move(pool), additions, rng))
    mask.points.push_back(p);
  return mask;
}

SamplingMask budget_matched_random(const EnvironmentGrid& env,
                                   const SamplingMask& reference,
                                   std::uint64_t seed) {
  SamplingMask mask = random_mask(env, reference.budget(), seed);
  mask.strategy = "budget_matched_random";
  return mask;
}

MeasurementSet sample_rss(const RadioMap& rm, const SamplingMask& mask,
                          double noise_std, std::uint64_t seed) {
  if (rm.normalized)
    throw AlreadyNormalized("sample_rss expects a dB-domain map");
  if (!(noise_std >= 0.0))
    throw InvalidEnvironment("noise_std must be nonnegative");
  const int n = static_cast<int>(rm.values.rows());
  MeasurementSet m;
  m.points = mask.points;
  m.noise_std = noise_std;
  m.seed = seed;
  m.raw_db.reserve(mask.points.size());
  Rng rng(derive_seed(seed, stream_tag("sample_rss")));
  for (const auto& p : mask.points) {
    if (p.row < 0 || p.col < 0 || p.row >= n || p.col >= n)
      throw MaskOutsideMap("mask point outside the map");
    double y = rm.values(p.row, p.col);
    if (noise_std > 0.0) y += rng.gaussian(0.0, noise_std);
    m.raw_db.push_back(y);
  }
  return m;
}

MeasurementSet normalize_rss(const MeasurementSet& m) {
  if (m.points.empty())
    throw EmptyMeasurements("cannot normalize an empty measurement set");
  MeasurementSet out = m;
  const double y_max = *std::max_element(m.raw_db.begin(), m.raw_db.end());
  out.normalized.clear();
  out.normalized.reserve(m.raw_db.size());
  for (double y : m.raw_db) {
    // Ratio p_i / p_max evaluated from the dB difference; quantizing the
    // difference to 2^-10 dB makes the output exactly offset-invariant.
    const double diff = std::nearbyint((y - y_max) * 1024.0) / 1024.0;
    out.normalized.push_back(std::pow(10.0, diff / 10.0));
  }
  return out;
}

ConditionTensor build_condition_tensor(const EnvironmentGrid& env,
                                       const MeasurementSet& m) {
  // An empty set is vacuously normalized and yields all-zero sparse channels.
  if (!m.points.empty() && !m.is_normalized())
    throw NotNormalized("condition tensor needs normalized measurements");
  const int n = env.size();
  ConditionTensor cond;
  cond.layout = env.occupancy.cast<double>();
  cond.rss = FieldGrid::Zero(n, n);
  for (std::size_t i = 0; i < m.points.size(); ++i) {
    const auto& p = m.points[i];
    if (p.row < 0 || p.col < 0 || p.row >= n || p.col >= n)
      throw MaskOutsideMap("measurement point outside the grid");
    cond.rss(p.row, p.col) = m.normalized[i];
  }
  cond.rss_dup = cond.rss;
  return cond;
}

void save_mask_text(const SamplingMask& mask,
                    const std::filesystem::path& path) {
  std::ostringstream body;
  for (const auto& p : mask.points) body << p.row << "," << p.col << "\n";
  write_file_atomic(path, body.str());
}

SamplingMask load_mask_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FileNotFound("cannot open mask file: " + path.string());
  SamplingMask mask;
  mask.strategy = "loaded";
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw UnreadableImage("malformed mask line: " + line);
    mask.points.push_back(
        {std::stoi(line.substr(0, comma)), std::stoi(line.substr(comma + 1))});
  }
  return mask;
}

void save_mask_pgm(const SamplingMask& mask, int grid_size,
                   const std::filesystem::path& path) {
  std::string body = "P5\n" + std::to_string(grid_size) + " " +
                     std::to_string(grid_size) + "\n255\n";
  std::string pixels(static_cast<std::size_t>(grid_size) * grid_size, '\0');
  for (const auto& p : mask.points) {
    if (p.row < 0 || p.col < 0 || p.row >= grid_size || p.col >= grid_size)
      throw MaskOutsideMap("mask point outside the grid");
    pixels[static_cast<std::size_t>(p.row) * grid_size + p.col] =
        static_cast<char>(255);
  }
  write_file_atomic(path, body + pixels);
}

} // namespace nlosloc
