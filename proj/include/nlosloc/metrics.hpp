// SPDX-License-Identifier: Apache-2.0
//
// Reconstruction and localization quality metrics, plus the tabular
// evaluation report written by the evaluate stage.

#pragma once

#include <limits>
#include <string>
#include <vector>

#include "nlosloc/localization.hpp"
#include "nlosloc/types.hpp"

namespace nlosloc {

// Mean squared error over all cells. Shapes must agree.
double mse(const FieldGrid& pred, const FieldGrid& truth);

// Root mean squared error.
double rmse(const FieldGrid& pred, const FieldGrid& truth);

// Normalized mean squared error: sum of squared differences divided by the
// total squared energy of the truth. Throws ZeroEnergyTruth when the truth
// grid is identically zero.
double nmse(const FieldGrid& pred, const FieldGrid& truth);

// Peak signal-to-noise ratio in dB for signals on [0, peak]. Returns
// +infinity when the grids match exactly.
double psnr(const FieldGrid& pred, const FieldGrid& truth, double peak = 1.0);

// Structural similarity averaged over non-overlapping 8x8 blocks with the
// standard stabilizers C1 = (0.01 L)^2 and C2 = (0.03 L)^2 and dynamic
// range L = 1. Rows and columns that do not fill a complete block are
// ignored. Throws MapTooSmallForWindow when either dimension is below 8.
double ssim(const FieldGrid& pred, const FieldGrid& truth);

// Euclidean distance in meters between an estimate (continuous cell
// coordinates, integers at cell centers) and the true transmitter cell.
double localization_error_m(const Estimate& est, const GridPoint& truth,
                            double cell_size);

// One evaluated scene/method pair. Metrics that do not apply to the method
// are left as NaN and serialize to empty CSV fields.
struct MetricRow {
  std::string scene_id;
  std::string method;
  double mse = std::numeric_limits<double>::quiet_NaN();
  double rmse = std::numeric_limits<double>::quiet_NaN();
  double nmse = std::numeric_limits<double>::quiet_NaN();
  double ssim = std::numeric_limits<double>::quiet_NaN();
  double psnr = std::numeric_limits<double>::quiet_NaN();
  double le_m = std::numeric_limits<double>::quiet_NaN();
  double sampling_ratio = std::numeric_limits<double>::quiet_NaN();
  double runtime_ms = 0.0;
};

// Per-method aggregate over the finite entries of each metric.
struct MetricSummary {
  std::string method;
  int scene_count = 0;
  double mean_mse = std::numeric_limits<double>::quiet_NaN();
  double mean_rmse = std::numeric_limits<double>::quiet_NaN();
  double mean_nmse = std::numeric_limits<double>::quiet_NaN();
  double mean_ssim = std::numeric_limits<double>::quiet_NaN();
  double mean_psnr = std::numeric_limits<double>::quiet_NaN();
  double mean_le_m = std::numeric_limits<double>::quiet_NaN();
  double median_le_m = std::numeric_limits<double>::quiet_NaN();
  double mean_sampling_ratio = std::numeric_limits<double>::quiet_NaN();
};

// Groups rows by method, preserving first-appearance order.
std::vector<MetricSummary> summarize_metrics(
    const std::vector<MetricRow>& rows);

// Serializes rows as RFC 4180 CSV (CRLF line endings, header row). NaN
// fields are left empty; infinities print as "inf"/"-inf". Byte-identical
// across runs for identical inputs.
std::string metrics_to_csv(const std::vector<MetricRow>& rows);

// Fixed-width human-readable summary table, one line per method.
std::string format_summary_table(const std::vector<MetricSummary>& summaries);

// Formats a double exactly the way the CSV writers do ("%.10g").
std::string format_metric(double v);

} // namespace nlosloc
