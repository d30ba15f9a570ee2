#pragma once
// Report emission. CSV columns are fixed:
//   sweep_value,err_exact,err_tail,err_bound,cost_exact,cost_bound,d_eps,runtime_ms
// Missing values are written as NA. An aborted or truncated study ends with a
// "# aborted: ..." or "# truncated: ..." line after the rows it completed.

#include <cerrno>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "study.hpp"

namespace hermite {

inline constexpr const char* kCsvHeader =
    "sweep_value,err_exact,err_tail,err_bound,cost_exact,cost_bound,d_eps,runtime_ms";

namespace detail {

inline std::string csv_cell(double v) {
  if (std::isnan(v)) return "NA";
  char buf[40];
  if (std::isfinite(v) && v == std::floor(v) && std::fabs(v) < 1e15)
    std::snprintf(buf, sizeof buf, "%.0f", v);
  else
    std::snprintf(buf, sizeof buf, "%.12e", v);
  return buf;
}

inline nlohmann::json json_num(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

inline std::string marker(const StudyReport& r) {
  if (!r.error.empty()) return "# aborted: " + r.error;
  if (r.truncated)
    return "# truncated: runtime cap reached after " + std::to_string(r.rows.size()) + " of " +
           std::to_string(r.planned_points) + " points";
  return {};
}

}  // namespace detail

inline void write_csv(std::ostream& os, const StudyReport& r) {
  os << kCsvHeader << '\n';
  for (const auto& row : r.rows) {
    using detail::csv_cell;
    os << csv_cell(row.sweep_value) << ',' << csv_cell(row.err_exact) << ',' << csv_cell(row.err_tail) << ','
       << csv_cell(row.err_bound) << ',' << csv_cell(row.cost_exact) << ',' << csv_cell(row.cost_bound) << ','
       << row.d_eps << ',' << csv_cell(row.runtime_ms) << '\n';
  }
  if (auto m = detail::marker(r); !m.empty()) os << m << '\n';
}

inline nlohmann::json summary_json(const StudyReport& r) {
  using detail::json_num;
  nlohmann::json j;
  j["type"] = "summary";
  j["problem"] = to_string(r.config.problem);
  j["scheme"] = r.scheme_id;
  j["seed"] = r.config.seed;
  j["fit_axis"] = r.fit_axis;
  j["target_rate"] = json_num(r.target_rate);
  if (r.fit) {
    j["fitted_rate"] = r.fit->rate;
    j["fit_intercept"] = r.fit->intercept;
    j["fit_residual_rms"] = r.fit->residual_rms;
    j["fit_points"] = r.fit->points;
  } else {
    j["fitted_rate"] = nullptr;
  }
  j["rows"] = r.rows.size();
  j["planned_points"] = r.planned_points;
  j["truncated"] = r.truncated;
  j["error"] = r.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(r.error);
  for (const auto& [k, v] : r.summary) j[k] = json_num(v);
  if (is_mdm(r.config.problem)) {
    j["kappa"] = r.config.kappa;
    j["delta"] = r.config.delta;
    j["anchor"] = r.config.anchor;
    j["cost_model"] = r.config.cost;
    j["test_function"] = r.config.test_function;
  }
  return j;
}

inline void write_jsonl(std::ostream& os, const StudyReport& r) {
  using detail::json_num;
  for (const auto& row : r.rows) {
    nlohmann::json j;
    j["type"] = "row";
    j["sweep_value"] = json_num(row.sweep_value);
    j["err_exact"] = json_num(row.err_exact);
    j["err_tail"] = json_num(row.err_tail);
    j["err_bound"] = json_num(row.err_bound);
    j["cost_exact"] = json_num(row.cost_exact);
    j["cost_bound"] = json_num(row.cost_bound);
    j["d_eps"] = row.d_eps;
    j["runtime_ms"] = json_num(row.runtime_ms);
    for (const auto& [k, v] : row.extra) j[k] = json_num(v);
    os << j.dump() << '\n';
  }
  os << summary_json(r).dump() << '\n';
}

// gnuplot data: block 0 holds (log10 x, log10 err), block 1 the fitted line.
inline void write_plot(std::ostream& os, const StudyReport& r) {
  const bool by_cost = r.fit_axis == "cost";
  os << "# log10_" << (by_cost ? "cost" : "n") << " log10_err\n";
  char buf[64];
  double xmin = INFINITY, xmax = -INFINITY;
  for (const auto& row : r.rows) {
    const double x = by_cost ? row.cost_exact : row.sweep_value;
    if (!(x > 0.0) || !(row.err_exact > 0.0)) continue;
    std::snprintf(buf, sizeof buf, "%.10f %.10f", std::log10(x), std::log10(row.err_exact));
    os << buf << '\n';
    xmin = std::min(xmin, x);
    xmax = std::max(xmax, x);
  }
  os << "\n\n# fitted line: log10_err = -(intercept + rate ln x) / ln 10\n";
  if (r.fit) {
    for (double x : {xmin, xmax}) {
      const double y = -(r.fit->intercept + r.fit->rate * std::log(x)) / std::log(10.0);
      std::snprintf(buf, sizeof buf, "%.10f %.10f", std::log10(x), y);
      os << buf << '\n';
    }
  }
}

// Writes <dir>/<stem>.csv, .jsonl and .plot.dat for the configured formats.
inline std::vector<std::string> emit(const StudyReport& r) {
  namespace fs = std::filesystem;
  const auto& cfg = r.config;
  std::error_code ec;
  fs::create_directories(cfg.out_dir, ec);
  if (ec) throw std::runtime_error("emit: cannot create " + cfg.out_dir + ": " + ec.message());
  std::vector<std::string> written;
  auto put = [&](const std::string& ext, auto&& writer) {
    const std::string path = (fs::path(cfg.out_dir) / (cfg.stem + ext)).string();
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("emit: cannot open " + path + ": " + std::strerror(errno));
    writer(os, r);
    os.flush();
    if (!os) throw std::runtime_error("emit: write failed for " + path + ": " + std::strerror(errno));
    written.push_back(path);
  };
  if (cfg.formats.count("csv")) put(".csv", [](std::ostream& o, const StudyReport& x) { write_csv(o, x); });
  if (cfg.formats.count("jsonl")) put(".jsonl", [](std::ostream& o, const StudyReport& x) { write_jsonl(o, x); });
  if (cfg.formats.count("plot")) put(".plot.dat", [](std::ostream& o, const StudyReport& x) { write_plot(o, x); });
  return written;
}

}  // namespace hermite
