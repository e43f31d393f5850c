// SPDX-License-Identifier: Apache-2.0
#include "remreg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <sstream>
#include <tuple>

#include "remreg/error.hpp"
#include "remreg/volume_io.hpp"

namespace remreg {
namespace {

constexpr const char* kHeader = "scale,method,dice,ncc,psnr,ssim";
constexpr const char* kAblationHeader = "scale,method,aux_loss,dice,ncc,psnr,ssim";
constexpr const char* kSrHeader = "scale,method,psnr,ssim";

void check_method(const std::string& m) {
  if (m.empty() || m.find_first_of(",\n\r\"") != std::string::npos) {
    throw ConfigError("report method name '" + m + "' must be non-empty and free of commas, quotes and newlines");
  }
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

double parse_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) throw IoError("report: cannot parse number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (s.empty() || end != s.c_str() + s.size()) throw IoError("report: cannot parse integer '" + s + "'");
  return static_cast<int>(v);
}

std::vector<std::string> data_lines(const std::string& csv, const std::string& header, bool* matched) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line)) throw IoError("report: empty input");
  *matched = line == header;
  std::vector<std::string> out;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  write_file(path, std::vector<std::uint8_t>(text.begin(), text.end()));
}

}  // namespace

std::string format_fixed6(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  // Avoid a "-0.000000" cell for tiny negatives.
  if (std::string(buf) == "-0.000000") return "0.000000";
  return buf;
}

std::string format_report(std::vector<MetricReportRow> rows) {
  if (rows.empty()) throw ConfigError("report has no rows");
  const bool ablation = rows.front().aux_loss.has_value();
  for (const auto& r : rows) {
    check_method(r.method);
    if (r.aux_loss.has_value() != ablation) throw ConfigError("report mixes ablation and plain rows");
  }
  std::stable_sort(rows.begin(), rows.end(), [](const MetricReportRow& a, const MetricReportRow& b) {
    return std::tie(a.scale, a.method, a.aux_loss) < std::tie(b.scale, b.method, b.aux_loss);
  });
  std::string out = ablation ? kAblationHeader : kHeader;
  out += '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.scale) + ',' + r.method + ',';
    if (ablation) out += *r.aux_loss ? "on," : "off,";
    out += format_fixed6(r.dice) + ',' + format_fixed6(r.ncc) + ',' + format_fixed6(r.psnr) + ',' +
           format_fixed6(r.ssim) + '\n';
  }
  return out;
}

void report_emit(const std::vector<MetricReportRow>& rows, const std::filesystem::path& path) {
  write_text(path, format_report(rows));
}

std::vector<MetricReportRow> parse_report(const std::string& csv) {
  bool plain = false;
  auto lines = data_lines(csv, kHeader, &plain);
  bool ablation = false;
  if (!plain) {
    lines = data_lines(csv, kAblationHeader, &ablation);
    if (!ablation) throw IoError("report: unrecognised header");
  }
  std::vector<MetricReportRow> rows;
  for (const auto& line : lines) {
    const auto f = split(line, ',');
    if (f.size() != (ablation ? 7u : 6u)) throw IoError("report: wrong field count in '" + line + "'");
    MetricReportRow r;
    std::size_t i = 0;
    r.scale = parse_int(f[i++]);
    r.method = f[i++];
    if (ablation) {
      const std::string& a = f[i++];
      if (a != "on" && a != "off") throw IoError("report: aux_loss must be on/off, got '" + a + "'");
      r.aux_loss = a == "on";
    }
    r.dice = parse_double(f[i++]);
    r.ncc = parse_double(f[i++]);
    r.psnr = parse_double(f[i++]);
    r.ssim = parse_double(f[i++]);
    rows.push_back(std::move(r));
  }
  return rows;
}

std::string format_sr_report(std::vector<SrReportRow> rows) {
  if (rows.empty()) throw ConfigError("report has no rows");
  for (const auto& r : rows) check_method(r.method);
  std::stable_sort(rows.begin(), rows.end(), [](const SrReportRow& a, const SrReportRow& b) {
    return std::tie(a.scale, a.method) < std::tie(b.scale, b.method);
  });
  std::string out = std::string(kSrHeader) + '\n';
  for (const auto& r : rows) {
    out += std::to_string(r.scale) + ',' + r.method + ',' + format_fixed6(r.psnr) + ',' + format_fixed6(r.ssim) + '\n';
  }
  return out;
}

void sr_report_emit(const std::vector<SrReportRow>& rows, const std::filesystem::path& path) {
  write_text(path, format_sr_report(rows));
}

std::vector<SrReportRow> parse_sr_report(const std::string& csv) {
  bool ok = false;
  const auto lines = data_lines(csv, kSrHeader, &ok);
  if (!ok) throw IoError("report: unrecognised header");
  std::vector<SrReportRow> rows;
  for (const auto& line : lines) {
    const auto f = split(line, ',');
    if (f.size() != 4) throw IoError("report: wrong field count in '" + line + "'");
    rows.push_back({f[1], parse_int(f[0]), parse_double(f[2]), parse_double(f[3])});
  }
  return rows;
}

}  // namespace remreg
