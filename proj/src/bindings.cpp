// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the core operations: map synthesis, mask strategies,
// measurement handling, reconstruction baselines, and the pipeline stages.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "nlosloc/dataio.hpp"
#include "nlosloc/diffusion.hpp"
#include "nlosloc/localization.hpp"
#include "nlosloc/metrics.hpp"
#include "nlosloc/pipeline.hpp"
#include "nlosloc/sampling.hpp"

namespace py = pybind11;
using namespace nlosloc;

namespace {

using CellList = std::vector<std::pair<int, int>>;

CellList to_pairs(const std::vector<GridPoint>& points) {
  CellList out;
  out.reserve(points.size());
  for (const auto& p : points) out.emplace_back(p.row, p.col);
  return out;
}

std::vector<GridPoint> to_points(const CellList& pairs) {
  std::vector<GridPoint> out;
  out.reserve(pairs.size());
  for (const auto& [r, c] : pairs) out.push_back({r, c});
  return out;
}

SamplingMask mask_for(const EnvironmentGrid& env, const std::string& strategy,
                      int budget, double random_fraction,
                      std::uint64_t seed) {
  if (strategy == "random") return random_mask(env, budget, seed);
  if (strategy == "edge") return edge_mask(env);
  if (strategy == "vertex") return vertex_mask(env);
  if (strategy == "hybrid") return hybrid_mask(env, random_fraction, seed);
  if (strategy == "budget_matched_random")
    return budget_matched_random(env, vertex_mask(env), seed);
  throw ConfigInvalid("unknown sampling strategy '" + strategy + "'");
}

} // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Radio-map synthesis, sparse sampling, reconstruction and "
            "emitter localization on occupancy grids";
  m.attr("__version__") = kVersion;

  m.def(
      "fresnel",
      [](double nu) {
        const FresnelResult r = fresnel_integrals(nu);
        return std::make_pair(r.c, r.s);
      },
      py::arg("nu"), "Fresnel integrals (C, S) at nu");

  m.def("excess_loss_db", &excess_loss_db, py::arg("nu"),
        "Single knife-edge excess loss in dB");

  m.def("diffraction_parameter", &diffraction_parameter, py::arg("h"),
        py::arg("d1"), py::arg("d2"), py::arg("wavelength"),
        "Dimensionless edge clearance parameter");

  m.def(
      "synthesize",
      [](const MaskGrid& occupancy, int tx_row, int tx_col,
         double frequency_hz, double tx_power_dbm, double exponent,
         double noise_floor_db) {
        const EnvironmentGrid env = make_environment(occupancy);
        return synthesize_radio_map(env, {tx_row, tx_col},
                                    make_params(frequency_hz, tx_power_dbm,
                                                exponent, noise_floor_db))
            .values;
      },
      py::arg("occupancy"), py::arg("tx_row"), py::arg("tx_col"),
      py::arg("frequency_hz") = 5.9e9, py::arg("tx_power_dbm") = 23.0,
      py::arg("exponent") = 3.0, py::arg("noise_floor_db") = -150.0,
      "Knife-edge pathloss map in dB for one emitter cell");

  m.def(
      "normalize_map",
      [](const FieldGrid& values) {
        RadioMap rm;
        rm.values = values;
        return normalize_radio_map(rm).values;
      },
      py::arg("values"), "Affine min-max rescale of a dB map to [0, 1]");

  m.def(
      "extract_edges",
      [](const MaskGrid& occupancy) {
        return to_pairs(extract_edges(make_environment(occupancy)));
      },
      py::arg("occupancy"), "Building-adjacent free cells");

  m.def(
      "extract_vertices",
      [](const MaskGrid& occupancy) {
        return to_pairs(extract_vertices(make_environment(occupancy)));
      },
      py::arg("occupancy"), "Building-corner free cells");

  m.def(
      "make_mask",
      [](const MaskGrid& occupancy, const std::string& strategy, int budget,
         double random_fraction, std::uint64_t seed) {
        const EnvironmentGrid env = make_environment(occupancy);
        return to_pairs(
            mask_for(env, strategy, budget, random_fraction, seed).points);
      },
      py::arg("occupancy"), py::arg("strategy"), py::arg("budget") = 64,
      py::arg("random_fraction") = 0.25, py::arg("seed") = 0,
      "Sampling cells for one strategy "
      "(random | edge | vertex | hybrid | budget_matched_random)");

  m.def(
      "sample_rss",
      [](const FieldGrid& values_db, const CellList& cells, double noise_std,
         std::uint64_t seed) {
        RadioMap rm;
        rm.values = values_db;
        SamplingMask mask;
        mask.points = to_points(cells);
        return sample_rss(rm, mask, noise_std, seed).raw_db;
      },
      py::arg("values_db"), py::arg("cells"), py::arg("noise_std") = 0.0,
      py::arg("seed") = 0, "Read the dB map at cells plus Gaussian noise");

  m.def(
      "normalize_rss",
      [](const std::vector<double>& raw_db) {
        MeasurementSet ms;
        ms.raw_db = raw_db;
        ms.points.resize(raw_db.size());
        return normalize_rss(ms).normalized;
      },
      py::arg("raw_db"),
      "Unit-max linear-domain gains, invariant to uniform dB offsets");

  m.def(
      "idw_reconstruct",
      [](const MaskGrid& occupancy, const CellList& cells,
         const std::vector<double>& normalized, double power) {
        const EnvironmentGrid env = make_environment(occupancy);
        MeasurementSet ms;
        ms.points = to_points(cells);
        ms.raw_db.assign(normalized.size(), 0.0);
        ms.normalized = normalized;
        return idw_reconstruct(build_condition_tensor(env, ms), power).values;
      },
      py::arg("occupancy"), py::arg("cells"), py::arg("normalized"),
      py::arg("power") = 2.0,
      "Inverse-distance interpolation of sparse normalized gains");

  m.def(
      "argmax_in_region",
      [](const FieldGrid& values, const MaskGrid& region) {
        RadioMap rm;
        rm.values = values;
        rm.normalized = true;
        const Estimate est = argmax_localize(rm, region);
        return std::make_pair(est.row, est.col);
      },
      py::arg("values"), py::arg("region"),
      "Cell of the largest value inside the region mask");

  m.def(
      "run_stage",
      [](const std::string& stage, const std::string& config_path,
         const std::vector<std::string>& overrides) {
        ConfigMap raw = load_config_file(config_path);
        for (const auto& assignment : overrides)
          apply_override(raw, assignment);
        return run_stage(stage, resolve_config(raw));
      },
      py::arg("stage"), py::arg("config_path"),
      py::arg("overrides") = std::vector<std::string>{},
      "Run one pipeline stage against a config file");
}
