#pragma once
// Study configuration: one INI file describes one study.
//
//   [study]     problem, seed, runtime_cap_s, record_timing, tol
//   [scheme]    spec
//   [sweep]     n = 8,16,...   or   eps = 0.3,0.1,...
//   [quadrature] r, delta, lead
//   [approx]    ratio
//   [mdm]       kappa, delta, anchor, C0, C1, calib_n_max, cost, cost_bracket, test_function
//   [output]    dir, stem, formats
//
// HERMITE_OUTPUT_DIR overrides [output] dir.

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "../mdm.hpp"
#include "../weight_scheme.hpp"
#include "../weights.hpp"
#include "test_function.hpp"

namespace hermite {

enum class Problem { INT_1D, APPROX_1D, MDM_INT, MDM_APPROX };

inline const char* to_string(Problem p) {
  switch (p) {
    case Problem::INT_1D: return "INT_1D";
    case Problem::APPROX_1D: return "APPROX_1D";
    case Problem::MDM_INT: return "MDM_INT";
    case Problem::MDM_APPROX: return "MDM_APPROX";
  }
  return "?";
}

inline Problem parse_problem(const std::string& s) {
  if (s == "INT_1D") return Problem::INT_1D;
  if (s == "APPROX_1D") return Problem::APPROX_1D;
  if (s == "MDM_INT") return Problem::MDM_INT;
  if (s == "MDM_APPROX") return Problem::MDM_APPROX;
  throw std::invalid_argument("config: unknown problem '" + s + "'");
}

inline bool is_mdm(Problem p) { return p == Problem::MDM_INT || p == Problem::MDM_APPROX; }

// "1:1:0.5 2:2:0.25" -> u = {1,2}, nu = {1,2}, c = {0.5,0.25}
inline TestFunction parse_test_function(const std::string& text) {
  TestFunction tf;
  std::istringstream in(text);
  std::string tok;
  std::vector<std::tuple<long, long, double>> items;
  while (in >> tok) {
    const auto p1 = tok.find(':'), p2 = tok.find(':', p1 == std::string::npos ? p1 : p1 + 1);
    if (p1 == std::string::npos || p2 == std::string::npos)
      throw std::invalid_argument("test_function: expected j:nu:c, got " + tok);
    items.emplace_back(std::stol(tok.substr(0, p1)), std::stol(tok.substr(p1 + 1, p2 - p1 - 1)),
                       detail::parse_num(tok.substr(p2 + 1)));
  }
  std::sort(items.begin(), items.end());
  for (auto [j, nu, c] : items) {
    tf.u.push_back(j);
    tf.nu.push_back(nu);
    tf.c.push_back(c);
  }
  tf.validate();
  return tf;
}

struct StudyConfig {
  Problem problem = Problem::INT_1D;
  std::string scheme = "pg1 r=2";
  std::vector<long> n_grid;
  std::vector<double> eps_grid;

  int rule_r = 0;  // 0: ceil(r_1)
  double quad_delta = 0.2;
  int lead = 3;
  long approx_ratio = 4;

  double kappa = 0.8;
  double delta = 0.6;
  double anchor = 0.0;
  double C0 = 0.0, C1 = 0.0;  // 0: calibrate
  long calib_n_max = 1000;
  std::string cost = "affine:1,1";
  double cost_lo = 1.0, cost_hi = 1.0;
  std::string test_function = "1:1:0.5 2:2:0.5 3:1:0.5";

  std::uint64_t seed = 1;
  double runtime_cap_s = 600.0;
  bool record_timing = false;
  double tol = 0.0;  // 0: problem default

  std::string out_dir = ".";
  std::string stem = "study";
  std::set<std::string> formats{"csv", "jsonl", "plot"};

  WeightScheme weight_scheme() const { return WeightScheme::parse(scheme); }
  CostModel cost_model() const { return CostModel::parse(cost); }
  TestFunction test_fn() const { return parse_test_function(test_function); }
  bool calibrate() const { return C0 == 0.0 || C1 == 0.0; }

  int rule_order() const {
    if (rule_r > 0) return rule_r;
    const WeightScheme s = weight_scheme();
    return std::max(1, int(std::ceil(s.kind() == SchemeKind::Custom ? 2.0 : s.r(1))));
  }
  double default_tol() const {
    if (tol > 0.0) return tol;
    switch (problem) {
      case Problem::INT_1D: return 1e-22;
      case Problem::APPROX_1D: return 1.0;
      default: return 1e-12;
    }
  }

  void validate() const {
    const WeightScheme s = weight_scheme();
    const bool one_d = problem == Problem::INT_1D || problem == Problem::APPROX_1D;
    if (one_d) {
      if (n_grid.empty() && !eps_grid.empty()) throw std::invalid_argument("config: 1-D studies sweep n");
      for (std::size_t i = 0; i < n_grid.size(); ++i) {
        if (n_grid[i] < 2) throw std::invalid_argument("config: n values must be >= 2");
        if (i && !(n_grid[i] > n_grid[i - 1])) throw std::invalid_argument("config: n grid must be strictly increasing");
      }
      if (problem == Problem::APPROX_1D)
        for (long n : n_grid)
          if (approx_ratio < 1 || n % approx_ratio || n / approx_ratio < 1)
            throw std::invalid_argument("config: n must be a positive multiple of approx ratio");
      if (!(quad_delta > 0.0 && quad_delta < 0.25)) throw std::invalid_argument("config: quadrature delta must lie in (0, 1/4)");
    } else {
      if (!n_grid.empty()) throw std::invalid_argument("config: MDM studies sweep eps");
      for (std::size_t i = 0; i < eps_grid.size(); ++i) {
        if (!(eps_grid[i] > 0.0)) throw std::invalid_argument("config: eps values must be positive");
        if (i && !(eps_grid[i] < eps_grid[i - 1])) throw std::invalid_argument("config: eps grid must be strictly decreasing");
      }
      if (!(kappa > 0.0)) throw std::invalid_argument("config: kappa must be positive");
      if (s.kind() != SchemeKind::Custom) (void)rho(s);  // rejects univariate schemes
      if (!std::isfinite(anchor)) throw std::invalid_argument("config: anchor must be finite");
      if (C0 < 0.0 || C1 < 0.0) throw std::invalid_argument("config: C0, C1 must be positive or auto");
      if (calib_n_max < 10) throw std::invalid_argument("config: calib_n_max must be >= 10");
      if (!(quad_delta > 0.0 && quad_delta < 0.25)) throw std::invalid_argument("config: quadrature delta must lie in (0, 1/4)");
      const CostModel cm = cost_model();
      if (!(cost_lo > 0.0) || !(cost_hi > 0.0) || !cm.bracket_check(cost_lo, cost_hi))
        throw std::invalid_argument("config: cost model violates the declared bracket c_lo n <= $(n) <= exp(c_hi n)");
      (void)test_fn();
      // trial plan at the coarsest eps exercises the kappa/delta admissibility checks
      (void)plan(s, eps_grid.empty() ? 1.0 : eps_grid.front(), kappa, delta, anchor, C0 > 0 ? C0 : 1.0,
                 C1 > 0 ? C1 : 1.0);
    }
    if (approx_ratio < 1) throw std::invalid_argument("config: approx ratio must be >= 1");
    if (lead < 0 || lead > 9) throw std::invalid_argument("config: lead must lie in 0..9");
    if (!(runtime_cap_s > 0.0)) throw std::invalid_argument("config: runtime_cap_s must be positive");
    if (stem.empty() || stem.find('/') != std::string::npos) throw std::invalid_argument("config: bad output stem");
    for (const auto& f : formats)
      if (f != "csv" && f != "jsonl" && f != "plot") throw std::invalid_argument("config: unknown format " + f);
  }
};

namespace detail {

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : text) {
    if (ch == ',' || ch == ' ' || ch == '\t') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

inline bool parse_bool(const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw std::invalid_argument("config: expected boolean, got " + v);
}

}  // namespace detail

inline StudyConfig parse_config(std::istream& in) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw std::invalid_argument(std::string("config: ") + e.what());
  }
  static const std::set<std::string> known{
      "study.problem",  "study.seed",        "study.runtime_cap_s", "study.record_timing", "study.tol",
      "scheme.spec",    "sweep.n",           "sweep.eps",           "quadrature.r",        "quadrature.delta",
      "quadrature.lead", "approx.ratio",     "mdm.kappa",           "mdm.delta",           "mdm.anchor",
      "mdm.C0",         "mdm.C1",            "mdm.calib_n_max",     "mdm.cost",            "mdm.cost_bracket",
      "mdm.test_function", "output.dir",     "output.stem",         "output.formats"};
  for (const auto& [sec, body] : tree) {
    if (body.empty()) throw std::invalid_argument("config: key '" + sec + "' outside a section");
    for (const auto& [key, v] : body)
      if (!known.count(sec + "." + key)) throw std::invalid_argument("config: unknown key " + sec + "." + key);
  }
  auto get = [&](const char* path) { return tree.get_optional<std::string>(path); };

  StudyConfig c;
  if (auto v = get("study.problem")) c.problem = parse_problem(*v);
  else throw std::invalid_argument("config: study.problem is required");
  if (auto v = get("study.seed")) c.seed = std::stoull(*v);
  if (auto v = get("study.runtime_cap_s")) c.runtime_cap_s = detail::parse_num(*v);
  if (auto v = get("study.record_timing")) c.record_timing = detail::parse_bool(*v);
  if (auto v = get("study.tol")) c.tol = detail::parse_num(*v);
  if (auto v = get("scheme.spec")) c.scheme = *v;
  else throw std::invalid_argument("config: scheme.spec is required");
  if (auto v = get("sweep.n"))
    for (const auto& t : detail::split_list(*v)) c.n_grid.push_back(std::stol(t));
  if (auto v = get("sweep.eps"))
    for (const auto& t : detail::split_list(*v)) c.eps_grid.push_back(detail::parse_num(t));
  if (auto v = get("quadrature.r")) c.rule_r = *v == "auto" ? 0 : std::stoi(*v);
  if (auto v = get("quadrature.delta")) c.quad_delta = detail::parse_num(*v);
  if (auto v = get("quadrature.lead")) c.lead = std::stoi(*v);
  if (auto v = get("approx.ratio")) c.approx_ratio = std::stol(*v);
  if (auto v = get("mdm.kappa")) c.kappa = detail::parse_num(*v);
  if (auto v = get("mdm.delta")) c.delta = detail::parse_num(*v);
  if (auto v = get("mdm.anchor")) c.anchor = detail::parse_num(*v);
  if (auto v = get("mdm.C0")) c.C0 = *v == "auto" ? 0.0 : detail::parse_num(*v);
  if (auto v = get("mdm.C1")) c.C1 = *v == "auto" ? 0.0 : detail::parse_num(*v);
  if (auto v = get("mdm.calib_n_max")) c.calib_n_max = std::stol(*v);
  if (auto v = get("mdm.cost")) c.cost = *v;
  if (auto v = get("mdm.cost_bracket")) {
    auto b = detail::parse_args(*v);
    if (b.size() != 2) throw std::invalid_argument("config: cost_bracket takes c_lo,c_hi");
    c.cost_lo = b[0];
    c.cost_hi = b[1];
  }
  if (auto v = get("mdm.test_function")) c.test_function = *v;
  if (auto v = get("output.dir")) c.out_dir = *v;
  if (auto v = get("output.stem")) c.stem = *v;
  if (auto v = get("output.formats")) {
    c.formats.clear();
    for (const auto& t : detail::split_list(*v)) c.formats.insert(t);
  }
  if (const char* env = std::getenv("HERMITE_OUTPUT_DIR"); env && *env) c.out_dir = env;
  c.validate();
  return c;
}

inline StudyConfig parse_config_string(const std::string& text) {
  std::istringstream in(text);
  return parse_config(in);
}

}  // namespace hermite
