// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <limits>
#include <string>
#include <vector>

#include "nlosloc/geometry.hpp"
#include "nlosloc/propagation.hpp"
#include "nlosloc/sampling.hpp"

namespace nlosloc {

// Emitter estimate in fractional cell coordinates. le_m is filled by the
// evaluation stage; converged is only meaningful for iterative solvers.
struct Estimate {
  double row = 0.0;
  double col = 0.0;
  std::string method;
  double le_m = std::numeric_limits<double>::quiet_NaN();
  bool converged = true;
  double dispersion = 0.0; // ensemble spread, cell units
};

// Log-distance model: rss(d) = p0_dbm - 10 n log10(d / reference_m).
struct PathlossModel {
  double p0_dbm = -24.86;
  double exponent = 3.0;
  double reference_m = 1.0;
};

double predicted_rss(const PathlossModel& model, double distance_m);

// Brightest cell within `region` (1-cells); ties resolve to the smallest
// (row, col). Throws EmptyRegion.
Estimate argmax_localize(const RadioMap& rm, const MaskGrid& region);

// Intensity-weighted centroid of the k brightest cells (value-descending,
// (row, col) ascending among ties). Falls back to the unweighted mean when
// the selected intensities sum to zero. Throws KTooLarge.
Estimate topk_weighted_centroid(const RadioMap& rm, int k);

// Unweighted centroid of {cell : value >= T_p} where T_p is the p-th
// percentile of all map values (linear interpolation between order
// statistics).
Estimate threshold_region_center(const RadioMap& rm, double percentile);

// Centroid of the largest 8-connected component of {value >= alpha * max}.
// Size ties resolve to the component holding the brightest cell, then to
// the component with the smallest first cell.
Estimate largest_blob_centroid(const RadioMap& rm, double alpha);

// Coordinate-wise median of member estimates; dispersion = mean pairwise
// distance between members (cell units). Throws EmptyRegion on no members.
Estimate ensemble_localize(const std::vector<Estimate>& members);

// Linearized least squares on inverted model distances (last anchor is the
// linearization reference). Needs >= 3 non-collinear anchors.
Estimate ls_localize(const MeasurementSet& m, const PathlossModel& model,
                     double cell_size);

// Same linear system with per-equation weights 1 / d_hat_i^2.
Estimate awls_localize(const MeasurementSet& m, const PathlossModel& model,
                       double cell_size);

// Grid maximum-likelihood scan over candidate cells (uniform prior). With
// estimate_p0, p0 is jointly maximized over a 1 dB grid spanning +-10 dB
// around the model value. Ties keep the earliest candidate.
Estimate mbe_localize(const MeasurementSet& m, const PathlossModel& model,
                      const std::vector<GridPoint>& candidates,
                      double noise_std, double cell_size,
                      bool estimate_p0 = false);

// Levenberg-Marquardt over (x, y, p0) with the exponent fixed, multi-start
// from the sensing centroid and the four grid quadrant centers. Damping
// starts at 1e-3 (x10 on reject, /10 on accept); stops at step norm < 1e-6
// or 200 iterations. Unconverged runs return the best iterate flagged.
Estimate nls_localize(const MeasurementSet& m, const PathlossModel& model0,
                      const EnvironmentGrid& env);

} // namespace nlosloc
