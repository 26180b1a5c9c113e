// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/localization.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>

namespace nlosloc {

namespace {

constexpr double kMinDistance = 1e-6; // meters; keeps log10 finite

struct Anchor {
  double x = 0.0; // row, meters
  double y = 0.0; // col, meters
  double rss = 0.0;
};

std::vector<Anchor> to_anchors(const MeasurementSet& m, double cell_size) {
  std::vector<Anchor> anchors(m.points.size());
  for (std::size_t i = 0; i < m.points.size(); ++i)
    anchors[i] = {(m.points[i].row + 0.5) * cell_size,
                  (m.points[i].col + 0.5) * cell_size, m.raw_db[i]};
  return anchors;
}

// Second singular value of the centered anchor cloud; ~0 means collinear.
bool collinear(const std::vector<Anchor>& anchors) {
  double mx = 0.0, my = 0.0;
  for (const auto& a : anchors) {
    mx += a.x;
    my += a.y;
  }
  mx /= anchors.size();
  my /= anchors.size();
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  double scale = 0.0;
  for (const auto& a : anchors) {
    const Eigen::Vector2d d(a.x - mx, a.y - my);
    scatter += d * d.transpose();
    scale = std::max(scale, d.squaredNorm());
  }
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(scatter);
  return es.eigenvalues()(0) <= 1e-12 * std::max(scale, 1.0);
}

double model_distance(const PathlossModel& model, double rss_db) {
  return model.reference_m *
         std::pow(10.0, (model.p0_dbm - rss_db) / (10.0 * model.exponent));
}

Estimate linearized_ls(const MeasurementSet& m, const PathlossModel& model,
                       double cell_size, bool weighted) {
  if (m.points.size() < 3)
    throw TooFewMeasurements("linearized solver needs >= 3 anchors");
  const auto anchors = to_anchors(m, cell_size);
  if (collinear(anchors)) throw DegenerateGeometry("anchors are collinear");

  const auto rows = static_cast<Eigen::Index>(anchors.size()) - 1;
  const Anchor& ref = anchors.back();
  const double dref = model_distance(model, ref.rss);
  Eigen::MatrixXd A(rows, 2);
  Eigen::VectorXd b(rows);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const Anchor& a = anchors[static_cast<std::size_t>(i)];
    const double di = model_distance(model, a.rss);
    A(i, 0) = 2.0 * (ref.x - a.x);
    A(i, 1) = 2.0 * (ref.y - a.y);
    b(i) = di * di - dref * dref - (a.x * a.x + a.y * a.y) +
           (ref.x * ref.x + ref.y * ref.y);
    if (weighted) {
      const double w = 1.0 / std::max(di * di, kMinDistance);
      const double sw = std::sqrt(w);
      A.row(i) *= sw;
      b(i) *= sw;
    }
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
  if (qr.rank() < 2) throw DegenerateGeometry("linearized system is rank deficient");
  const Eigen::Vector2d p = qr.solve(b);

  Estimate est;
  est.method = weighted ? "awls" : "ls";
  est.row = p(0) / cell_size - 0.5;
  est.col = p(1) / cell_size - 0.5;
  return est;
}

} // namespace

double predicted_rss(const PathlossModel& model, double distance_m) {
  const double d = std::max(distance_m, kMinDistance);
  return model.p0_dbm -
         10.0 * model.exponent * std::log10(d / model.reference_m);
}

Estimate argmax_localize(const RadioMap& rm, const MaskGrid& region) {
  if (region.rows() != rm.values.rows() || region.cols() != rm.values.cols())
    throw ShapeMismatch("region mask shape disagrees with the map");
  bool found = false;
  GridPoint best{};
  double best_v = 0.0;
  for (Eigen::Index r = 0; r < rm.values.rows(); ++r)
    for (Eigen::Index c = 0; c < rm.values.cols(); ++c) {
      if (!region(r, c)) continue;
      const double v = rm.values(r, c);
      if (!found || v > best_v) {
        found = true;
        best_v = v;
        best = {static_cast<int>(r), static_cast<int>(c)};
      }
    }
  if (!found) throw EmptyRegion("no cell inside the query region");
  Estimate est;
  est.method = "argmax";
  est.row = best.row;
  est.col = best.col;
  return est;
}

Estimate topk_weighted_centroid(const RadioMap& rm, int k) {
  const auto total = rm.values.size();
  if (k < 1 || k > total)
    throw KTooLarge("k must lie in [1, number of cells]");

  struct Cell {
    double v;
    int r, c;
  };
  std::vector<Cell> cells;
  cells.reserve(static_cast<std::size_t>(total));
  for (Eigen::Index r = 0; r < rm.values.rows(); ++r)
    for (Eigen::Index c = 0; c < rm.values.cols(); ++c)
      cells.push_back({rm.values(r, c), static_cast<int>(r),
                       static_cast<int>(c)});
  std::nth_element(cells.begin(), cells.begin() + (k - 1), cells.end(),
                   [](const Cell& a, const Cell& b) {
                     if (a.v != b.v) return a.v > b.v;
                     if (a.r != b.r) return a.r < b.r;
                     return a.c < b.c;
                   });
  std::sort(cells.begin(), cells.begin() + k, [](const Cell& a, const Cell& b) {
    if (a.v != b.v) return a.v > b.v;
    if (a.r != b.r) return a.r < b.r;
    return a.c < b.c;
  });

  double wsum = 0.0, rsum = 0.0, csum = 0.0;
  for (int i = 0; i < k; ++i) {
    wsum += cells[i].v;
    rsum += cells[i].v * cells[i].r;
    csum += cells[i].v * cells[i].c;
  }
  Estimate est;
  est.method = "topk_wc";
  if (wsum > 0.0) {
    est.row = rsum / wsum;
    est.col = csum / wsum;
  } else {
    double r = 0.0, c = 0.0;
    for (int i = 0; i < k; ++i) {
      r += cells[i].r;
      c += cells[i].c;
    }
    est.row = r / k;
    est.col = c / k;
  }
  return est;
}

Estimate threshold_region_center(const RadioMap& rm, double percentile) {
  if (!(percentile >= 0.0) || !(percentile <= 100.0))
    throw EmptyRegion("percentile must lie in [0, 100]");
  std::vector<double> sorted(rm.values.data(),
                             rm.values.data() + rm.values.size());
  std::sort(sorted.begin(), sorted.end());
  const auto n = sorted.size();
  const double rank = percentile / 100.0 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(rank);
  const auto hi = std::min(lo + 1, n - 1);
  const double frac = rank - static_cast<double>(lo);
  const double threshold = sorted[lo] + frac * (sorted[hi] - sorted[lo]);

  double rsum = 0.0, csum = 0.0;
  std::size_t count = 0;
  for (Eigen::Index r = 0; r < rm.values.rows(); ++r)
    for (Eigen::Index c = 0; c < rm.values.cols(); ++c)
      if (rm.values(r, c) >= threshold) {
        rsum += static_cast<double>(r);
        csum += static_cast<double>(c);
        ++count;
      }
  Estimate est;
  est.method = "threshold_rc";
  est.row = rsum / static_cast<double>(count);
  est.col = csum / static_cast<double>(count);
  return est;
}

Estimate largest_blob_centroid(const RadioMap& rm, double alpha) {
  if (!(alpha > 0.0) || alpha > 1.0)
    throw EmptyRegion("alpha must lie in (0, 1]");
  const int n_rows = static_cast<int>(rm.values.rows());
  const int n_cols = static_cast<int>(rm.values.cols());
  const double vmax = rm.values.maxCoeff();
  const double threshold = alpha * vmax;

  std::vector<int> label(static_cast<std::size_t>(n_rows) * n_cols, -1);
  const auto at = [&](int r, int c) -> int& {
    return label[static_cast<std::size_t>(r) * n_cols + c];
  };
  struct Component {
    int size = 0;
    double max_v = -std::numeric_limits<double>::infinity();
    GridPoint first{};
    double rsum = 0.0, csum = 0.0;
  };
  std::vector<Component> comps;

  for (int r = 0; r < n_rows; ++r)
    for (int c = 0; c < n_cols; ++c) {
      if (rm.values(r, c) < threshold || at(r, c) != -1) continue;
      const int id = static_cast<int>(comps.size());
      comps.push_back({});
      Component& comp = comps.back();
      comp.first = {r, c};
      std::deque<GridPoint> queue{{r, c}};
      at(r, c) = id;
      while (!queue.empty()) {
        const GridPoint p = queue.front();
        queue.pop_front();
        ++comp.size;
        comp.rsum += p.row;
        comp.csum += p.col;
        comp.max_v = std::max(comp.max_v, rm.values(p.row, p.col));
        for (int dr = -1; dr <= 1; ++dr)
          for (int dc = -1; dc <= 1; ++dc) {
            if (dr == 0 && dc == 0) continue;
            const int rr = p.row + dr, cc = p.col + dc;
            if (rr < 0 || cc < 0 || rr >= n_rows || cc >= n_cols) continue;
            if (rm.values(rr, cc) < threshold || at(rr, cc) != -1) continue;
            at(rr, cc) = id;
            queue.push_back({rr, cc});
          }
      }
    }

  const Component* best = nullptr;
  for (const auto& comp : comps) {
    if (!best || comp.size > best->size ||
        (comp.size == best->size && comp.max_v > best->max_v) ||
        (comp.size == best->size && comp.max_v == best->max_v &&
         comp.first < best->first))
      best = &comp;
  }
  // threshold <= max guarantees at least one component
  Estimate est;
  est.method = "largest_blob";
  est.row = best->rsum / best->size;
  est.col = best->csum / best->size;
  return est;
}

Estimate ensemble_localize(const std::vector<Estimate>& members) {
  if (members.empty()) throw EmptyRegion("no member estimates");
  std::vector<double> rows, cols;
  rows.reserve(members.size());
  cols.reserve(members.size());
  for (const auto& e : members) {
    rows.push_back(e.row);
    cols.push_back(e.col);
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  Estimate est;
  est.method = "ensemble";
  est.row = median(rows);
  est.col = median(cols);

  double pair_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < members.size(); ++i)
    for (std::size_t j = i + 1; j < members.size(); ++j) {
      pair_sum += std::hypot(members[i].row - members[j].row,
                             members[i].col - members[j].col);
      ++pairs;
    }
  est.dispersion = pairs ? pair_sum / static_cast<double>(pairs) : 0.0;
  return est;
}

Estimate ls_localize(const MeasurementSet& m, const PathlossModel& model,
                     double cell_size) {
  return linearized_ls(m, model, cell_size, false);
}

Estimate awls_localize(const MeasurementSet& m, const PathlossModel& model,
                       double cell_size) {
  return linearized_ls(m, model, cell_size, true);
}

Estimate mbe_localize(const MeasurementSet& m, const PathlossModel& model,
                      const std::vector<GridPoint>& candidates,
                      double noise_std, double cell_size, bool estimate_p0) {
  if (m.points.empty()) throw TooFewMeasurements("no measurements");
  if (candidates.empty()) throw EmptyCandidates("no candidate cells");
  const auto anchors = to_anchors(m, cell_size);
  const double sigma = noise_std > 0.0 ? noise_std : 1.0;

  std::vector<double> p0_grid{model.p0_dbm};
  if (estimate_p0) {
    p0_grid.clear();
    for (int k = -10; k <= 10; ++k)
      p0_grid.push_back(model.p0_dbm + static_cast<double>(k));
  }

  double best_ll = -std::numeric_limits<double>::infinity();
  GridPoint best = candidates.front();
  for (const auto& cand : candidates) {
    const double cx = (cand.row + 0.5) * cell_size;
    const double cy = (cand.col + 0.5) * cell_size;
    for (const double p0 : p0_grid) {
      PathlossModel trial = model;
      trial.p0_dbm = p0;
      double ll = 0.0;
      for (const auto& a : anchors) {
        const double d = std::hypot(a.x - cx, a.y - cy);
        const double mu = predicted_rss(trial, d);
        const double resid = a.rss - mu;
        ll -= resid * resid / (2.0 * sigma * sigma);
      }
      if (ll > best_ll) {
        best_ll = ll;
        best = cand;
      }
    }
  }
  Estimate est;
  est.method = "mbe";
  est.row = best.row;
  est.col = best.col;
  return est;
}

Estimate nls_localize(const MeasurementSet& m, const PathlossModel& model0,
                      const EnvironmentGrid& env) {
  if (m.points.size() < 4)
    throw TooFewMeasurements("nls needs >= 4 measurements");
  const double cell_size = env.cell_size;
  const auto anchors = to_anchors(m, cell_size);
  if (collinear(anchors)) throw DegenerateGeometry("anchors are collinear");

  const double ln10 = std::log(10.0);
  const auto cost_of = [&](const Eigen::Vector3d& p) {
    double cost = 0.0;
    PathlossModel trial = model0;
    trial.p0_dbm = p(2);
    for (const auto& a : anchors) {
      const double d = std::hypot(p(0) - a.x, p(1) - a.y);
      const double resid = a.rss - predicted_rss(trial, d);
      cost += resid * resid;
    }
    return cost;
  };

  // Start points: sensing-region centroid plus the four quadrant centers.
  std::vector<Eigen::Vector3d> starts;
  {
    const auto sensing = env.free_sensing_cells();
    double r = 0.0, c = 0.0;
    if (!sensing.empty()) {
      for (const auto& p : sensing) {
        r += p.row + 0.5;
        c += p.col + 0.5;
      }
      r = r / sensing.size() * cell_size;
      c = c / sensing.size() * cell_size;
    } else {
      r = c = env.size() * cell_size / 2.0;
    }
    starts.push_back({r, c, model0.p0_dbm});
    const double q1 = env.size() * cell_size * 0.25;
    const double q3 = env.size() * cell_size * 0.75;
    starts.push_back({q1, q1, model0.p0_dbm});
    starts.push_back({q1, q3, model0.p0_dbm});
    starts.push_back({q3, q1, model0.p0_dbm});
    starts.push_back({q3, q3, model0.p0_dbm});
  }

  Eigen::Vector3d best_p = starts.front();
  double best_cost = std::numeric_limits<double>::infinity();
  bool best_converged = false;
  const auto rows = static_cast<Eigen::Index>(anchors.size());
  Eigen::MatrixXd J(rows, 3);
  Eigen::VectorXd resid(rows);

  for (const auto& start : starts) {
    Eigen::Vector3d p = start;
    double lambda = 1e-3;
    double cost = cost_of(p);
    bool converged = false;
    for (int iter = 0; iter < 200 && !converged; ++iter) {
      PathlossModel trial = model0;
      trial.p0_dbm = p(2);
      for (Eigen::Index i = 0; i < rows; ++i) {
        const auto& a = anchors[static_cast<std::size_t>(i)];
        const double dx = p(0) - a.x, dy = p(1) - a.y;
        const double d = std::max(std::hypot(dx, dy), kMinDistance);
        resid(i) = a.rss - predicted_rss(trial, d);
        const double g = 10.0 * model0.exponent / (ln10 * d * d);
        J(i, 0) = g * dx;
        J(i, 1) = g * dy;
        J(i, 2) = -1.0;
      }
      const Eigen::Matrix3d JtJ = J.transpose() * J;
      // Descent direction: (J^T J + lambda I) step = -J^T r.
      const Eigen::Vector3d Jtr = -J.transpose() * resid;
      bool stepped = false;
      for (int attempt = 0; attempt < 25 && !stepped; ++attempt) {
        Eigen::Matrix3d damped = JtJ;
        damped.diagonal().array() += lambda;
        const Eigen::Vector3d step = damped.ldlt().solve(Jtr);
        const Eigen::Vector3d cand = p + step;
        const double cand_cost = cost_of(cand);
        if (cand_cost <= cost) {
          p = cand;
          cost = cand_cost;
          lambda = std::max(lambda / 10.0, 1e-12);
          stepped = true;
          if (step.norm() < 1e-6) converged = true;
        } else {
          lambda *= 10.0;
        }
      }
      if (!stepped) converged = true; // damping saturated; local minimum
    }
    if (cost < best_cost) {
      best_cost = cost;
      best_p = p;
      best_converged = converged;
    }
  }

  Estimate est;
  est.method = "nls";
  est.converged = best_converged;
  const double n_m = env.size() * cell_size;
  est.row = std::clamp(best_p(0), 0.0, n_m) / cell_size - 0.5;
  est.col = std::clamp(best_p(1), 0.0, n_m) / cell_size - 0.5;
  return est;
}

} // namespace nlosloc
