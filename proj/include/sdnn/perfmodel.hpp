#pragma once

// Power-law execution-time model T = (n_ops / n1)^beta, fitted by ordinary
// least squares on (log10 n_ops, log10 T). n1 is the number of operations
// that completes in one second.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "sdnn/error.hpp"

namespace sdnn {

/// Timings shorter than this are below useful timer resolution.
inline constexpr double kMinRecordSeconds = 1e-6;

struct TimingRecord {
  double n_ops = 0.0;
  double t_dnn = 0.0;
  std::string label;
};

struct PowerLawFit {
  double n1 = 0.0;
  double beta = 0.0;
  double r_squared = 0.0;
  std::size_t n_points = 0;
};

struct ReferenceModel {
  std::string submission;
  double max_connections;
  double n1;
  double beta;
};

/// 2019 submission coefficients.
inline const std::vector<ReferenceModel>& reference_table() {
  static const std::vector<ReferenceModel> table = {
      {"Bisson-Nvidia-2019", 4.0e9, 1e13, 4.0 / 5.0},
      {"Davis-TAMU-2019", 4.0e9, 1e11, 1.0},
      {"Ellis-Sandia-2019", 4.0e9, 1.5e11, 1.0},
      {"Wang-UCDavis-2019", 1.0e9, 2e11, 1.0},
      {"Wang-PingAn-2019", 1.0e9, 2e11, 1.1},
      {"Mofrad-UPitt-2019", 4.0e9, 5e10, 1.0},
  };
  return table;
}

inline double predict(double n1, double beta, double n_ops) {
  return std::pow(n_ops / n1, beta);
}

inline double predict(const PowerLawFit& fit, double n_ops) {
  return predict(fit.n1, fit.beta, n_ops);
}

inline PowerLawFit fit_power_law(const std::vector<TimingRecord>& records) {
  if (records.size() < 2) {
    throw InsufficientDataError("fit_power_law: need at least 2 records, got " +
                                std::to_string(records.size()));
  }
  for (const auto& r : records) {
    if (!(r.n_ops >= 1.0)) {
      throw InvariantError("fit_power_law: n_ops must be >= 1 (record '" + r.label + "')");
    }
    if (!(r.t_dnn >= kMinRecordSeconds)) {
      throw InvariantError("fit_power_law: t_dnn below 1e-6 s (record '" + r.label + "')");
    }
  }
  const double n = static_cast<double>(records.size());
  double mx = 0.0, my = 0.0;
  for (const auto& r : records) {
    mx += std::log10(r.n_ops);
    my += std::log10(r.t_dnn);
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (const auto& r : records) {
    const double dx = std::log10(r.n_ops) - mx;
    const double dy = std::log10(r.t_dnn) - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  // Relative to the spread of x itself so that exact duplicates are caught
  // regardless of magnitude.
  if (sxx <= 1e-24 * std::max(1.0, mx * mx) * n) {
    throw InsufficientDataError("fit_power_law: degenerate design, all n_ops identical");
  }
  const double beta = sxy / sxx;
  const double intercept = my - beta * mx;
  if (beta == 0.0) {
    throw InsufficientDataError("fit_power_law: zero slope, n1 undefined");
  }
  PowerLawFit fit;
  fit.beta = beta;
  fit.n1 = std::pow(10.0, -intercept / beta);
  fit.n_points = records.size();
  double ss_res = 0.0;
  for (const auto& r : records) {
    const double e = std::log10(r.t_dnn) - (intercept + beta * std::log10(r.n_ops));
    ss_res += e * e;
  }
  fit.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

/// Log-space residuals log10(t) - log10(predict(fit, n_ops)), record order.
inline std::vector<double> log_residuals(const PowerLawFit& fit,
                                         const std::vector<TimingRecord>& records) {
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) {
    out.push_back(std::log10(r.t_dnn) - std::log10(predict(fit, r.n_ops)));
  }
  return out;
}

/// Parses engine result lines (JSON objects with n_ops and t_dnn_seconds).
/// Blank lines are skipped. The label is built from the run's shape.
inline std::vector<TimingRecord> parse_result_lines(std::istream& in,
                                                    const std::string& origin = "<stream>") {
  std::vector<TimingRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TimingRecord r;
      r.n_ops = j.at("n_ops").get<double>();
      r.t_dnn = j.at("t_dnn_seconds").get<double>();
      std::ostringstream label;
      label << "N" << j.value("n_neurons", 0) << "-L" << j.value("n_layers", 0) << "-in"
            << j.value("n_inputs", 0) << "-" << j.value("representation", "?") << "-w"
            << j.value("workers", 0);
      r.label = label.str();
      out.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

inline std::vector<TimingRecord> read_result_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return parse_result_lines(in, path);
}

/// Keeps the fastest record for each distinct (label, n_ops).
inline std::vector<TimingRecord> min_per_configuration(const std::vector<TimingRecord>& records) {
  std::map<std::pair<std::string, double>, TimingRecord> best;
  for (const auto& r : records) {
    auto key = std::make_pair(r.label, r.n_ops);
    auto it = best.find(key);
    if (it == best.end() || r.t_dnn < it->second.t_dnn) best[key] = r;
  }
  std::vector<TimingRecord> out;
  out.reserve(best.size());
  for (auto& [k, r] : best) out.push_back(r);
  return out;
}

struct ReportPaths {
  std::filesystem::path summary;
  std::filesystem::path csv;
  std::filesystem::path fit_line;
  std::vector<std::filesystem::path> reference_lines;
};

namespace detail {

inline std::string fmt_g(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + p.string() + " for writing");
  out << content;
  if (!out) throw IoError("error writing " + p.string());
}

/// Log-spaced n_ops grid over [lo, hi].
inline std::vector<double> log_grid(double lo, double hi, std::size_t points) {
  std::vector<double> xs;
  if (points < 2 || lo == hi) return {lo};
  const double a = std::log10(lo), b = std::log10(hi);
  for (std::size_t i = 0; i < points; ++i) {
    xs.push_back(std::pow(10.0, a + (b - a) * static_cast<double>(i) / (points - 1)));
  }
  return xs;
}

inline std::string slug(const std::string& s) {
  std::string out;
  for (char c : s) out += std::isalnum(static_cast<unsigned char>(c)) ? c : '_';
  return out;
}

}  // namespace detail

/// Writes into `dir`:
///   summary.txt                 fitted coefficients next to each reference
///   fit.csv                     n_ops,t_measured,t_fit,rate per record
///   fit_line.tsv                n_ops<TAB>t of the fitted model
///   reference_<name>.tsv        same for each reference model
/// All model lines share one log-spaced n_ops grid over the records' range.
inline ReportPaths emit_report(const PowerLawFit& fit, const std::vector<TimingRecord>& records,
                               const std::vector<ReferenceModel>& references,
                               const std::filesystem::path& dir,
                               std::size_t grid_points = 50) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (!(fit.n1 > 0.0)) throw InvariantError("emit_report: fit.n1 must be positive");

  ReportPaths paths;
  paths.summary = dir / "summary.txt";
  paths.csv = dir / "fit.csv";
  paths.fit_line = dir / "fit_line.tsv";

  std::string csv = "n_ops,t_measured,t_fit,rate\n";
  double lo = 0.0, hi = 0.0;
  for (const auto& r : records) {
    csv += detail::fmt_g(r.n_ops) + "," + detail::fmt_g(r.t_dnn) + "," +
           detail::fmt_g(predict(fit, r.n_ops)) + "," + detail::fmt_g(r.n_ops / r.t_dnn) + "\n";
    lo = lo == 0.0 ? r.n_ops : std::min(lo, r.n_ops);
    hi = std::max(hi, r.n_ops);
  }
  detail::write_text(paths.csv, csv);

  const auto grid = records.empty() ? std::vector<double>{fit.n1}
                                    : detail::log_grid(lo, hi, grid_points);
  auto line_file = [&](double n1, double beta) {
    std::string s;
    for (double x : grid) s += detail::fmt_g(x) + "\t" + detail::fmt_g(predict(n1, beta, x)) + "\n";
    return s;
  };
  detail::write_text(paths.fit_line, line_file(fit.n1, fit.beta));
  for (const auto& ref : references) {
    auto p = dir / ("reference_" + detail::slug(ref.submission) + ".tsv");
    detail::write_text(p, line_file(ref.n1, ref.beta));
    paths.reference_lines.push_back(p);
  }

  std::ostringstream sum;
  sum << "Power-law fit  T = (N_op / N1)^beta\n";
  sum << "  points     " << fit.n_points << "\n";
  sum << "  N1         " << detail::fmt_g(fit.n1) << " ops\n";
  sum << "  beta       " << detail::fmt_g(fit.beta) << "\n";
  sum << "  r^2        " << detail::fmt_g(fit.r_squared) << "\n";
  if (!records.empty()) {
    sum << "  N_op range " << detail::fmt_g(lo) << " .. " << detail::fmt_g(hi) << "\n";
  }
  if (!references.empty()) {
    const double probe = records.empty() ? fit.n1 : hi;
    sum << "\nReference models (2019 submissions), T at N_op = " << detail::fmt_g(probe) << "\n";
    auto row = [&](const std::string& name, const std::string& max_nc, double n1, double beta) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "  %-20s %10s %10.3g %6.3g %12.4g s\n", name.c_str(),
                    max_nc.c_str(), n1, beta, predict(n1, beta, probe));
      sum << buf;
    };
    char head[160];
    std::snprintf(head, sizeof head, "  %-20s %10s %10s %6s %14s\n", "submission", "max_Nc",
                  "N1", "beta", "T");
    sum << head;
    for (const auto& ref : references) {
      char nc[32];
      std::snprintf(nc, sizeof nc, "%.3g", ref.max_connections);
      row(ref.submission, nc, ref.n1, ref.beta);
    }
    row("this fit", "-", fit.n1, fit.beta);
  }
  detail::write_text(paths.summary, sum.str());
  return paths;
}

}  // namespace sdnn
