// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace remreg {

/// One registration result cell: a method at an upscaling factor.
struct MetricReportRow {
  std::string method;
  int scale = 1;
  double dice = 0.0;
  double ncc = 0.0;
  double psnr = 0.0;  // +inf for identical images
  double ssim = 0.0;
  std::optional<bool> aux_loss;  // set only in ablation reports

  bool operator==(const MetricReportRow&) const = default;
};

/// Super-resolution quality of one method at one factor.
struct SrReportRow {
  std::string method;
  int scale = 1;
  double psnr = 0.0;
  double ssim = 0.0;

  bool operator==(const SrReportRow&) const = default;
};

/// CSV text with header `scale,method,dice,ncc,psnr,ssim`, rows sorted by
/// (scale, method), values in fixed notation with 6 decimals. When every row
/// carries `aux_loss` an `aux_loss` column (on/off) follows `method`.
/// Mixing ablation and plain rows is rejected.
std::string format_report(std::vector<MetricReportRow> rows);
/// Writes format_report(rows) to `path`; rows must be non-empty.
void report_emit(const std::vector<MetricReportRow>& rows, const std::filesystem::path& path);
/// Inverse of format_report.
std::vector<MetricReportRow> parse_report(const std::string& csv);

/// CSV with header `scale,method,psnr,ssim`, same ordering and formatting.
std::string format_sr_report(std::vector<SrReportRow> rows);
void sr_report_emit(const std::vector<SrReportRow>& rows, const std::filesystem::path& path);
std::vector<SrReportRow> parse_sr_report(const std::string& csv);

/// Fixed 6-decimal rendering; "inf", "-inf" and "nan" for non-finite values.
std::string format_fixed6(double v);

}  // namespace remreg
