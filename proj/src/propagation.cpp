// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

namespace nlosloc {

namespace {

using std::numbers::pi;

double fresnel_cos_term(double t) { return std::cos(0.5 * pi * t * t); }
double fresnel_sin_term(double t) { return std::sin(0.5 * pi * t * t); }

// Adaptive Simpson with Richardson correction; tol is the absolute error
// budget for the current panel.
double adaptive_simpson(const std::function<double(double)>& f, double a,
                        double m, double b, double fa, double fm, double fb,
                        double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol)
    return left + right + delta / 15.0;
  return adaptive_simpson(f, a, lm, m, fa, flm, fm, left, 0.5 * tol,
                          depth - 1) +
         adaptive_simpson(f, m, rm, b, fm, frm, fb, right, 0.5 * tol,
                          depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b,
                 double tol) {
  if (a == b) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, m, b, fa, fm, fb, whole, tol, 48);
}

Vec2 cell_center_m(const GridPoint& p, double cell_size) {
  return {(p.row + 0.5) * cell_size, (p.col + 0.5) * cell_size};
}

Vec2 segment_position_m(const ObstructionSegment& seg, double cell_size) {
  const Vec2 a = cell_center_m(seg.entry, cell_size);
  const Vec2 b = cell_center_m(seg.exit, cell_size);
  return (a + b) * 0.5;
}

// Principal-edge recursion. level 0 picks the dominant edge of the whole
// path, level 1 the dominant edge of each sub-path; deeper recursion is cut
// off so at most three edges contribute.
double principal_edge_loss(const std::vector<ObstructionSegment>& segments,
                           std::size_t lo, std::size_t hi, const Vec2& a,
                           const Vec2& b, double cell_size, double lambda,
                           int level) {
  if (lo >= hi) return 0.0;
  std::size_t principal = lo;
  double best_nu = -std::numeric_limits<double>::infinity();
  for (std::size_t i = lo; i < hi; ++i) {
    const Vec2 pos = segment_position_m(segments[i], cell_size);
    const double d1 = std::max(distance(a, pos), 1e-9);
    const double d2 = std::max(distance(pos, b), 1e-9);
    const double nu =
        diffraction_parameter(segments[i].height, d1, d2, lambda);
    if (nu > best_nu) {
      best_nu = nu;
      principal = i;
    }
  }
  double loss = excess_loss_db(best_nu);
  if (level < 1) {
    const Vec2 apex = segment_position_m(segments[principal], cell_size);
    loss += principal_edge_loss(segments, lo, principal, a, apex, cell_size,
                                lambda, level + 1);
    loss += principal_edge_loss(segments, principal + 1, hi, apex, b,
                                cell_size, lambda, level + 1);
  }
  return loss;
}

} // namespace

PropagationParams make_params(double frequency_hz, double tx_power_dbm,
                              double pathloss_exponent,
                              double noise_floor_db) {
  if (frequency_hz <= 0.0)
    throw InvalidGeometry("carrier frequency must be positive");
  PropagationParams p;
  p.frequency_hz = frequency_hz;
  p.tx_power_dbm = tx_power_dbm;
  p.pathloss_exponent = pathloss_exponent;
  p.noise_floor_db = noise_floor_db;
  p.reference_loss_db = 20.0 * std::log10(4.0 * pi / p.wavelength());
  return p;
}

RadioMap normalize_radio_map(const RadioMap& rm) {
  if (rm.normalized) throw AlreadyNormalized("radio map already normalized");
  const double lo = rm.values.minCoeff();
  const double hi = rm.values.maxCoeff();
  if (!(hi > lo))
    throw InvalidEnvironment("cannot normalize a constant radio map");
  RadioMap out = rm;
  out.values = (rm.values - lo) / (hi - lo);
  out.normalized = true;
  return out;
}

FresnelResult fresnel_integrals(double nu) {
  if (!std::isfinite(nu))
    throw NonFiniteInput("fresnel integrals need a finite argument");
  const double x = std::abs(nu);
  const double sign = nu < 0.0 ? -1.0 : 1.0;
  FresnelResult r;
  r.c = sign * integrate(fresnel_cos_term, 0.0, x, 1e-11);
  r.s = sign * integrate(fresnel_sin_term, 0.0, x, 1e-11);
  return r;
}

double diffraction_parameter(double h, double d1, double d2, double lambda) {
  if (!(d1 > 0.0) || !(d2 > 0.0) || !(lambda > 0.0))
    throw InvalidGeometry("diffraction parameter needs d1, d2, lambda > 0");
  return h * std::sqrt(2.0 * (d1 + d2)) / std::sqrt(lambda * d1 * d2);
}

std::complex<double> knife_edge_field_ratio(double nu, bool complementary) {
  const FresnelResult f = fresnel_integrals(nu);
  const std::complex<double> half(0.5, 0.5);
  if (complementary)
    return half * std::complex<double>(0.5 - f.c, 0.5 - f.s);
  return half * std::complex<double>(f.c, f.s);
}

double excess_loss_db(double nu) {
  if (nu < -0.7) return 0.0;
  const double u = nu - 0.1;
  const double loss = 6.9 + 20.0 * std::log10(std::sqrt(u * u + 1.0) + u);
  return std::max(0.0, loss);
}

double fresnel_zone_width(double lambda, double distance) {
  if (!(lambda > 0.0) || !(distance > 0.0))
    throw InvalidGeometry("fresnel zone needs lambda, distance > 0");
  return std::sqrt(lambda * distance);
}

double kirchhoff_tail_bound(double e0, double wavenumber, double delta) {
  if (!(wavenumber > 0.0) || !(delta > 0.0))
    throw InvalidGeometry("tail bound needs wavenumber, delta > 0");
  return e0 / (pi * wavenumber * delta);
}

RadioMap synthesize_radio_map(const EnvironmentGrid& env, const GridPoint& tx,
                              const PropagationParams& params) {
  env.validate();
  if (!env.in_bounds(tx)) throw OutOfBounds("transmitter outside the grid");
  if (env.occupied(tx)) throw TxInsideBuilding("transmitter inside building");

  const int n = env.size();
  const double lambda = params.wavelength();
  const Vec2 tx_m = cell_center_m(tx, env.cell_size);

  RadioMap rm;
  rm.tx = tx;
  rm.params = params;
  rm.values = FieldGrid::Constant(n, n, params.noise_floor_db);

  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) {
      const GridPoint rx{r, c};
      if (env.occupied(rx)) continue;
      const Vec2 rx_m = cell_center_m(rx, env.cell_size);
      // Log-distance term, clamped at the 1 m reference distance.
      const double d = std::max(distance(tx_m, rx_m), 1.0);
      double received = params.tx_power_dbm - params.reference_loss_db -
                        10.0 * params.pathloss_exponent * std::log10(d);
      const auto profile = trace_obstructions(env, tx, rx);
      if (!profile.clear())
        received -= principal_edge_loss(profile.segments, 0,
                                        profile.segments.size(), tx_m, rx_m,
                                        env.cell_size, lambda, 0);
      rm.values(r, c) = std::max(received, params.noise_floor_db);
    }
  }
  return rm;
}

Eigen::MatrixXcd kirchhoff_matrix(const std::vector<EdgeSegment>& segments,
                                  const std::vector<Vec2>& probes,
                                  const Vec2& source, const Vec2& edge_dir,
                                  double lambda) {
  if (!(lambda > 0.0)) throw InvalidGeometry("lambda must be positive");
  const double dir_norm = edge_dir.norm();
  if (!(dir_norm > 0.0))
    throw InvalidGeometry("edge direction must be non-zero");
  const Vec2 normal{-edge_dir.y / dir_norm, edge_dir.x / dir_norm};
  const double k = 2.0 * pi / lambda;

  Eigen::MatrixXcd K(probes.size(), segments.size());
  for (std::size_t j = 0; j < segments.size(); ++j) {
    const auto& seg = segments[j];
    if (!(seg.ds > 0.0))
      throw InvalidGeometry("segment length must be positive");
    const Vec2 inc = seg.center - source;
    const double inc_norm = inc.norm();
    if (!(inc_norm > 0.0))
      throw InvalidGeometry("source coincides with a segment center");
    const double cos_i = std::abs(inc.dot(normal)) / inc_norm;
    for (std::size_t i = 0; i < probes.size(); ++i) {
      const Vec2 dif = probes[i] - seg.center;
      const double r = dif.norm();
      if (!(r > 0.0))
        throw InvalidGeometry("probe coincides with a segment center");
      const double cos_d = std::abs(dif.dot(normal)) / r;
      const std::complex<double> phase(std::cos(k * r), std::sin(k * r));
      K(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) =
          seg.ds / (2.0 * pi) * (cos_i + cos_d) * phase / r;
    }
  }
  if (!K.allFinite()) throw NonFiniteInput("kirchhoff matrix has NaN/inf");
  return K;
}

Eigen::MatrixXd exponential_prior(const std::vector<EdgeSegment>& segments,
                                  double corr_length) {
  if (!(corr_length > 0.0))
    throw InvalidGeometry("correlation length must be positive");
  const auto n = static_cast<Eigen::Index>(segments.size());
  Eigen::MatrixXd C(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index k = 0; k < n; ++k)
      C(j, k) = std::exp(-std::abs(segments[j].s - segments[k].s) /
                         corr_length);
  return C;
}

Eigen::MatrixXcd fisher_information(const Eigen::MatrixXcd& K, double sigma) {
  if (!(sigma > 0.0)) throw InvalidGeometry("sigma must be positive");
  if (!K.allFinite()) throw NonFiniteInput("K has NaN/inf");
  return (K.adjoint() * K) / (sigma * sigma);
}

namespace {

void check_psd(const Eigen::MatrixXd& C) {
  if (C.rows() != C.cols()) throw BadShape("prior covariance must be square");
  if (!C.isApprox(C.transpose(), 1e-10))
    throw NotPSD("prior covariance is not symmetric");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  if (es.eigenvalues().minCoeff() < -1e-10)
    throw NotPSD("prior covariance has a negative eigenvalue");
}

double mutual_information_checked(const Eigen::MatrixXcd& K,
                                  const Eigen::MatrixXd& C, double sigma) {
  const auto m = K.rows();
  Eigen::MatrixXcd M = Eigen::MatrixXcd::Identity(m, m) +
                       (K * C * K.adjoint()) / (sigma * sigma);
  Eigen::LLT<Eigen::MatrixXcd> llt(M);
  double logdet = 0.0;
  if (llt.info() == Eigen::Success) {
    for (Eigen::Index i = 0; i < m; ++i)
      logdet += 2.0 * std::log(std::real(llt.matrixLLT()(i, i)));
  } else {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(M);
    for (Eigen::Index i = 0; i < m; ++i)
      logdet += std::log(std::max(es.eigenvalues()(i), 1e-300));
  }
  return std::max(0.0, 0.5 * logdet);
}

} // namespace

double mutual_information(const Eigen::MatrixXcd& K, const Eigen::MatrixXd& C,
                          double sigma) {
  if (!(sigma > 0.0)) throw InvalidGeometry("sigma must be positive");
  if (!K.allFinite()) throw NonFiniteInput("K has NaN/inf");
  if (K.cols() != C.rows())
    throw ShapeMismatch("K and C dimensions disagree");
  check_psd(C);
  return mutual_information_checked(K, C, sigma);
}

EdgeDiscretization build_edge_discretization(
    const std::vector<EdgeSegment>& segments, const std::vector<Vec2>& probes,
    const Vec2& source, const Vec2& edge_dir, double lambda, double sigma,
    double corr_length) {
  if (!(sigma > 0.0)) throw InvalidGeometry("sigma must be positive");
  EdgeDiscretization disc;
  disc.segments = segments;
  disc.probes = probes;
  disc.source = source;
  disc.sigma = sigma;
  disc.K = kirchhoff_matrix(segments, probes, source, edge_dir, lambda);
  disc.prior = exponential_prior(segments, corr_length);
  return disc;
}

GreedyPlacement greedy_probe_placement(const EdgeDiscretization& disc,
                                       int budget) {
  const int n = static_cast<int>(disc.probes.size());
  if (n == 0) throw EmptyCandidates("no candidate probes");
  if (budget < 0 || budget > n)
    throw BudgetTooLarge("budget exceeds candidate count");
  check_psd(disc.prior);

  GreedyPlacement placement;
  std::vector<int> chosen;
  std::vector<bool> used(n, false);
  double current = 0.0;
  for (int step = 0; step < budget; ++step) {
    int best = -1;
    double best_mi = -std::numeric_limits<double>::infinity();
    for (int cand = 0; cand < n; ++cand) {
      if (used[cand]) continue;
      std::vector<int> trial = chosen;
      trial.push_back(cand);
      Eigen::MatrixXcd Ks(trial.size(), disc.K.cols());
      for (std::size_t i = 0; i < trial.size(); ++i)
        Ks.row(static_cast<Eigen::Index>(i)) = disc.K.row(trial[i]);
      const double mi =
          mutual_information_checked(Ks, disc.prior, disc.sigma);
      if (mi > best_mi) {
        best_mi = mi;
        best = cand;
      }
    }
    used[best] = true;
    chosen.push_back(best);
    placement.order.push_back(best);
    placement.gains.push_back(best_mi - current);
    current = best_mi;
  }
  return placement;
}

} // namespace nlosloc
