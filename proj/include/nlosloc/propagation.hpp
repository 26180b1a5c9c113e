// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <complex>
#include <vector>

#include "nlosloc/geometry.hpp"
#include "nlosloc/types.hpp"

namespace nlosloc {

inline constexpr double kSpeedOfLight = 299792458.0;

// Log-distance channel constants. reference_loss_db is the loss at the 1 m
// reference distance; make_params derives it from the carrier frequency as
// the free-space loss at 1 m.
struct PropagationParams {
  double frequency_hz = 5.9e9;
  double tx_power_dbm = 23.0;
  double pathloss_exponent = 3.0;
  double reference_loss_db = 47.86;
  double noise_floor_db = -150.0;

  double wavelength() const { return kSpeedOfLight / frequency_hz; }
};

PropagationParams make_params(double frequency_hz = 5.9e9,
                              double tx_power_dbm = 23.0,
                              double pathloss_exponent = 3.0,
                              double noise_floor_db = -150.0);

// Dense gain field over a grid. values hold dBm when normalized == false and
// unitless [0, 1] gains after normalize_radio_map. tx == (-1, -1) marks a map
// whose source cell is unknown (e.g. a reconstruction).
struct RadioMap {
  FieldGrid values;
  GridPoint tx{-1, -1};
  bool normalized = false;
  PropagationParams params;
};

// Affine min-max rescaling of the dB field to [0, 1]. Invariant under any
// uniform dB offset of the input. Building cells end at the map minimum.
RadioMap normalize_radio_map(const RadioMap& rm);

struct FresnelResult {
  double c = 0.0; // integral of cos(pi t^2 / 2) over [0, nu]
  double s = 0.0; // integral of sin(pi t^2 / 2) over [0, nu]
};

// Band-limited adaptive Simpson evaluation; absolute error well below 1e-8.
// Odd in nu: C(-nu) = -C(nu), S(-nu) = -S(nu).
FresnelResult fresnel_integrals(double nu);

// nu = h * sqrt(2 (d1 + d2)) / sqrt(lambda d1 d2); h above the sight line.
// Throws InvalidGeometry unless d1, d2, lambda > 0.
double diffraction_parameter(double h, double d1, double d2, double lambda);

// Field ratio E/E0 behind a knife edge. The default form is
// (1 + j)/2 * (C(nu) + j S(nu)); complementary = true evaluates
// (1 + j)/2 * ((0.5 - C(nu)) + j (0.5 - S(nu))) instead.
std::complex<double> knife_edge_field_ratio(double nu,
                                            bool complementary = false);

// Single knife-edge excess loss in dB:
//   nu >= -0.7 : max(0, 6.9 + 20 log10(sqrt((nu-0.1)^2 + 1) + nu - 0.1))
//   nu <  -0.7 : 0
// Nonnegative and nondecreasing in nu.
double excess_loss_db(double nu);

// First Fresnel zone half-width sqrt(lambda * distance).
double fresnel_zone_width(double lambda, double distance);

// Truncation tail bound E0 / (pi k delta) for a Kirchhoff edge integral cut
// off delta away from the stationary point.
double kirchhoff_tail_bound(double e0, double wavenumber, double delta);

// Log-distance pathloss plus multi-edge knife-edge diffraction via principal
// edge recursion (at most 3 edges per path). Output is an un-normalized dB
// map clipped below at the noise floor; building cells sit at the floor.
RadioMap synthesize_radio_map(const EnvironmentGrid& env, const GridPoint& tx,
                              const PropagationParams& params);

// --- information-theoretic edge analysis -----------------------------------

// One straight-edge current segment: arc position s, length ds and center in
// the plane (meters).
struct EdgeSegment {
  double s = 0.0;
  double ds = 1.0;
  Vec2 center;
};

// Discretized edge + candidate probes with the derived operators.
struct EdgeDiscretization {
  std::vector<EdgeSegment> segments;
  std::vector<Vec2> probes;
  Vec2 source;
  Eigen::MatrixXcd K;     // probes x segments forward operator
  Eigen::MatrixXd prior;  // segments x segments PSD covariance
  double sigma = 1.0;     // per-probe noise std
};

// K_ij = (ds_j / 2 pi) (cos th_i + cos th_d) exp(j k r_ij) / r_ij with
// angles measured against the edge normal. Throws InvalidGeometry on a
// probe coinciding with a segment center or non-positive lambda / ds.
Eigen::MatrixXcd kirchhoff_matrix(const std::vector<EdgeSegment>& segments,
                                  const std::vector<Vec2>& probes,
                                  const Vec2& source, const Vec2& edge_dir,
                                  double lambda);

// C_jk = exp(-|s_j - s_k| / corr_length).
Eigen::MatrixXd exponential_prior(const std::vector<EdgeSegment>& segments,
                                  double corr_length);

// J = sigma^-2 K^H K (Hermitian PSD).
Eigen::MatrixXcd fisher_information(const Eigen::MatrixXcd& K, double sigma);

// I(y; c) = 1/2 log det(I + sigma^-2 K C K^H), nats. Throws NotPSD when C
// has an eigenvalue below -1e-10.
double mutual_information(const Eigen::MatrixXcd& K, const Eigen::MatrixXd& C,
                          double sigma);

EdgeDiscretization build_edge_discretization(
    const std::vector<EdgeSegment>& segments, const std::vector<Vec2>& probes,
    const Vec2& source, const Vec2& edge_dir, double lambda, double sigma,
    double corr_length);

struct GreedyPlacement {
  std::vector<int> order;    // chosen probe indices, in selection order
  std::vector<double> gains; // MI gain of each selection
};

// Greedy MI maximization over probe subsets; ties resolve to the lowest
// candidate index. Gains are nonincreasing (submodularity) and the final
// set achieves at least (1 - 1/e) of the optimal budget-size MI.
GreedyPlacement greedy_probe_placement(const EdgeDiscretization& disc,
                                       int budget);

} // namespace nlosloc
