// SPDX-License-Identifier: Apache-2.0
#include "nlosloc/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "nlosloc/errors.hpp"

namespace nlosloc {

namespace {

void check_shapes(const FieldGrid& pred, const FieldGrid& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ShapeMismatch("prediction and truth shapes disagree");
  if (pred.size() == 0) throw ShapeMismatch("empty grids");
}

double finite_mean(const std::vector<double>& v) {
  double sum = 0.0;
  int n = 0;
  for (double x : v)
    if (std::isfinite(x)) {
      sum += x;
      ++n;
    }
  return n ? sum / n : std::numeric_limits<double>::quiet_NaN();
}

double finite_median(std::vector<double> v) {
  std::vector<double> f;
  for (double x : v)
    if (std::isfinite(x)) f.push_back(x);
  if (f.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(f.begin(), f.end());
  const auto n = f.size();
  return n % 2 == 1 ? f[n / 2] : 0.5 * (f[n / 2 - 1] + f[n / 2]);
}

// RFC 4180: quote fields holding comma, quote, or line break.
std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

} // namespace

std::string format_metric(double v) {
  if (std::isnan(v)) return "";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

double mse(const FieldGrid& pred, const FieldGrid& truth) {
  check_shapes(pred, truth);
  return (pred - truth).square().sum() / static_cast<double>(pred.size());
}

double rmse(const FieldGrid& pred, const FieldGrid& truth) {
  return std::sqrt(mse(pred, truth));
}

double nmse(const FieldGrid& pred, const FieldGrid& truth) {
  check_shapes(pred, truth);
  const double energy = truth.square().sum();
  if (energy == 0.0)
    throw ZeroEnergyTruth("truth grid has zero energy, nmse undefined");
  return (pred - truth).square().sum() / energy;
}

double psnr(const FieldGrid& pred, const FieldGrid& truth, double peak) {
  const double err = mse(pred, truth);
  if (err == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / err);
}

double ssim(const FieldGrid& pred, const FieldGrid& truth) {
  check_shapes(pred, truth);
  constexpr int kBlock = 8;
  constexpr double kL = 1.0;
  constexpr double kC1 = (0.01 * kL) * (0.01 * kL);
  constexpr double kC2 = (0.03 * kL) * (0.03 * kL);
  const auto block_rows = pred.rows() / kBlock;
  const auto block_cols = pred.cols() / kBlock;
  if (block_rows == 0 || block_cols == 0)
    throw MapTooSmallForWindow("grid smaller than the 8x8 ssim window");

  double total = 0.0;
  for (Eigen::Index br = 0; br < block_rows; ++br)
    for (Eigen::Index bc = 0; bc < block_cols; ++bc) {
      const auto x = pred.block(br * kBlock, bc * kBlock, kBlock, kBlock);
      const auto y = truth.block(br * kBlock, bc * kBlock, kBlock, kBlock);
      constexpr double kN = kBlock * kBlock;
      const double mx = x.sum() / kN;
      const double my = y.sum() / kN;
      const double vx = (x - mx).square().sum() / kN;
      const double vy = (y - my).square().sum() / kN;
      const double cov = ((x - mx) * (y - my)).sum() / kN;
      total += (2.0 * mx * my + kC1) * (2.0 * cov + kC2) /
               ((mx * mx + my * my + kC1) * (vx + vy + kC2));
    }
  return total / static_cast<double>(block_rows * block_cols);
}

double localization_error_m(const Estimate& est, const GridPoint& truth,
                            double cell_size) {
  return cell_size * std::hypot(est.row - static_cast<double>(truth.row),
                                est.col - static_cast<double>(truth.col));
}

std::vector<MetricSummary> summarize_metrics(
    const std::vector<MetricRow>& rows) {
  std::vector<std::string> order;
  for (const auto& row : rows)
    if (std::find(order.begin(), order.end(), row.method) == order.end())
      order.push_back(row.method);

  std::vector<MetricSummary> out;
  for (const auto& method : order) {
    std::vector<double> v_mse, v_rmse, v_nmse, v_ssim, v_psnr, v_le, v_sr;
    int count = 0;
    for (const auto& row : rows) {
      if (row.method != method) continue;
      ++count;
      v_mse.push_back(row.mse);
      v_rmse.push_back(row.rmse);
      v_nmse.push_back(row.nmse);
      v_ssim.push_back(row.ssim);
      v_psnr.push_back(row.psnr);
      v_le.push_back(row.le_m);
      v_sr.push_back(row.sampling_ratio);
    }
    MetricSummary s;
    s.method = method;
    s.scene_count = count;
    s.mean_mse = finite_mean(v_mse);
    s.mean_rmse = finite_mean(v_rmse);
    s.mean_nmse = finite_mean(v_nmse);
    s.mean_ssim = finite_mean(v_ssim);
    s.mean_psnr = finite_mean(v_psnr);
    s.mean_le_m = finite_mean(v_le);
    s.median_le_m = finite_median(v_le);
    s.mean_sampling_ratio = finite_mean(v_sr);
    out.push_back(std::move(s));
  }
  return out;
}

std::string metrics_to_csv(const std::vector<MetricRow>& rows) {
  std::string out =
      "scene_id,method,mse,rmse,nmse,ssim,psnr,le_m,sampling_ratio,"
      "runtime_ms\r\n";
  for (const auto& row : rows) {
    out += csv_escape(row.scene_id);
    out += ',';
    out += csv_escape(row.method);
    for (double v : {row.mse, row.rmse, row.nmse, row.ssim, row.psnr,
                     row.le_m, row.sampling_ratio, row.runtime_ms}) {
      out += ',';
      out += format_metric(v);
    }
    out += "\r\n";
  }
  return out;
}

std::string format_summary_table(
    const std::vector<MetricSummary>& summaries) {
  std::string out;
  char buf[320];
  std::snprintf(buf, sizeof(buf),
                "%-16s %6s %10s %10s %8s %9s %9s %11s %10s\n", "method",
                "scenes", "nmse", "rmse", "ssim", "psnr", "le_mean",
                "le_median", "ratio");
  out += buf;
  const auto cell = [](double v) {
    std::string s = format_metric(v);
    return s.empty() ? std::string("-") : s;
  };
  for (const auto& s : summaries) {
    std::snprintf(
        buf, sizeof(buf),
        "%-16s %6d %10.10s %10.10s %8.8s %9.9s %9.9s %11.11s %10.10s\n",
        s.method.c_str(), s.scene_count, cell(s.mean_nmse).c_str(),
        cell(s.mean_rmse).c_str(), cell(s.mean_ssim).c_str(),
        cell(s.mean_psnr).c_str(), cell(s.mean_le_m).c_str(),
        cell(s.median_le_m).c_str(), cell(s.mean_sampling_ratio).c_str());
    out += buf;
  }
  return out;
}

} // namespace nlosloc
