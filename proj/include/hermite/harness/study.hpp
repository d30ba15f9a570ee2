#pragma once
#include <chrono>
#include <cmath>
#include <exception>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "../approx1d.hpp"
#include "../decay.hpp"
#include "../mdm.hpp"
#include "../quad1d.hpp"
#include "../smolyak.hpp"
#include "../weights.hpp"
#include "config.hpp"
#include "test_function.hpp"

namespace hermite {

inline constexpr double kNA = std::numeric_limits<double>::quiet_NaN();

struct StudyRow {
  double sweep_value = 0.0;
  double err_exact = 0.0;
  double err_tail = 0.0;
  double err_bound = kNA;
  double cost_exact = 0.0;
  double cost_bound = kNA;
  int d_eps = 1;
  double runtime_ms = kNA;
  std::map<std::string, double> extra;  // JSON only
};

struct StudyReport {
  StudyConfig config;
  std::string scheme_id;
  std::string fit_axis;  // "n" or "cost"
  std::vector<StudyRow> rows;
  std::optional<DecayFit> fit;
  double target_rate = kNA;
  std::map<std::string, double> summary;  // study specific constants
  bool truncated = false;
  std::string error;
  std::size_t planned_points = 0;
};

// Decay of the univariate worst-case error: r for PG integration, r/2 for
// L2 approximation, unbounded for EG.
inline double univariate_decay(const WeightScheme& s, bool l2) {
  switch (s.kind()) {
    case SchemeKind::PG: return l2 ? s.r(1) / 2.0 : s.r(1);
    case SchemeKind::EG: return std::numeric_limits<double>::infinity();
    case SchemeKind::Custom: return kNA;
  }
  return kNA;
}

inline double target_rate(Problem p, const WeightScheme& s) {
  const bool l2 = p == Problem::APPROX_1D || p == Problem::MDM_APPROX;
  const double d1 = univariate_decay(s, l2);
  if (!is_mdm(p) || s.kind() == SchemeKind::Custom) return d1;
  return std::min(d1, (rho(s) - 1.0) / 2.0);
}

// Decay fit of err_exact against the fit axis; rows with a non-increasing axis
// value or zero error are skipped.
inline std::optional<DecayFit> fit_rows(const std::vector<StudyRow>& rows, bool by_cost) {
  std::vector<std::pair<double, double>> pts;
  for (const auto& r : rows) {
    const double x = by_cost ? r.cost_exact : r.sweep_value;
    if (!(r.err_exact > 0.0)) continue;
    if (!pts.empty() && !(x > pts.back().first)) continue;
    pts.emplace_back(x, r.err_exact);
  }
  if (pts.size() < 4) return std::nullopt;
  return decay_estimate(pts);
}

namespace detail {

inline double approx_cost_bound(const MdmPlan& P, const CostModel& cm) {
  CompensatedSum b;
  b.add(cm(0));
  for (const auto& as : P.active) b.add(double(as.n) * std::ldexp(1.0, int(as.u.size())) * cm(long(as.u.size())));
  return double(b.value());
}

}  // namespace detail

inline StudyReport run_study(const StudyConfig& cfg) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  auto elapsed_s = [&] { return std::chrono::duration<double>(clock::now() - t0).count(); };

  StudyReport rep;
  rep.config = cfg;
  const WeightScheme s = cfg.weight_scheme();
  rep.scheme_id = s.id();
  rep.fit_axis = is_mdm(cfg.problem) ? "cost" : "n";
  rep.target_rate = target_rate(cfg.problem, s);
  rep.planned_points = is_mdm(cfg.problem) ? cfg.eps_grid.size() : cfg.n_grid.size();
  const double tol = cfg.default_tol();

  // per point timer; the value is only kept when record_timing is set
  auto stamp = [&](StudyRow& row, clock::time_point start) {
    if (cfg.record_timing) row.runtime_ms = std::chrono::duration<double, std::milli>(clock::now() - start).count();
  };
  auto over_cap = [&] {
    if (elapsed_s() > cfg.runtime_cap_s) rep.truncated = true;
    return rep.truncated;
  };

  try {
    switch (cfg.problem) {
      case Problem::INT_1D: {
        const int r = cfg.rule_order();
        double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
        for (long n : cfg.n_grid) {
          if (over_cap()) break;
          const auto start = clock::now();
          const Rule1D R = build_An(n, r, cfg.quad_delta);
          const ErrorReport e = worst_case_error_int(R, s, 1, tol);
          StudyRow row;
          row.sweep_value = double(n);
          row.err_exact = e.err;
          row.err_tail = e.tail_bound;
          row.cost_exact = double(R.size());
          const double ratio = double(R.size()) / double(n);
          row.extra["nodes_per_n"] = ratio;
          lo = std::min(lo, ratio);
          hi = std::max(hi, ratio);
          stamp(row, start);
          rep.rows.push_back(std::move(row));
        }
        if (!rep.rows.empty()) {
          rep.summary["node_constant"] = hi;
          rep.summary["node_ratio_spread"] = hi / lo;
        }
        rep.summary["rule_r"] = r;
        break;
      }
      case Problem::APPROX_1D: {
        for (long n : cfg.n_grid) {
          if (over_cap()) break;
          const auto start = clock::now();
          const long N = n / cfg.approx_ratio;
          const Approx1D ap = build_ls_approx(n, N, cfg.seed);
          const ErrorReport e = worst_case_error_l2(ap, s, 1, -1, tol);
          StudyRow row;
          row.sweep_value = double(n);
          row.err_exact = e.err;
          row.err_tail = e.tail_bound;
          row.cost_exact = double(ap.nodes.size());
          row.extra["basis_dim"] = double(N);
          row.extra["condition"] = ap.condition;
          row.extra["lower_bound"] = spectral_lower_bound(s, 1, long(ap.nodes.size()));
          stamp(row, start);
          rep.rows.push_back(std::move(row));
        }
        break;
      }
      case Problem::MDM_INT:
      case Problem::MDM_APPROX: {
        const LevelFamily fam(cfg.rule_order(), cfg.quad_delta, cfg.anchor, cfg.lead);
        GramCache cache(s, fam);
        const CostModel cm = cfg.cost_model();
        const TestFunction tf = cfg.test_fn();
        const double f_norm = test_function_norm(tf, s);
        double C0 = cfg.C0, C1 = cfg.C1;
        if (cfg.calibrate()) {
          const auto cu = c_up(s, cfg.anchor, 1e-12);
          const auto cal = calibrate_smolyak(cache, cfg.kappa, cfg.calib_n_max, cu.value + cu.tail_bound);
          C0 = cal.C0;
          C1 = cal.C1;
          rep.summary["calib_samples"] = double(cal.samples.size());
        }
        rep.summary["C0"] = C0;
        rep.summary["C1"] = C1;
        const ApproxFamily afam(cfg.anchor, cfg.seed);
        for (double eps : cfg.eps_grid) {
          if (over_cap()) break;
          const auto start = clock::now();
          const MdmPlan P = plan(s, eps, cfg.kappa, cfg.delta, cfg.anchor, C0, C1);
          StudyRow row;
          row.sweep_value = eps;
          row.d_eps = P.d_eps;
          row.extra["active_sets"] = double(P.active.size());
          if (cfg.problem == Problem::MDM_INT) {
            const FlatRule F = assemble(P, fam);
            const ErrorReport e = worst_case_error_K(F, s, tol, KErrorMethod::Auto, &cache);
            const MdmErrorBound b = mdm_error_bound(P, s, fam);
            const MdmCost c = mdm_cost(P, F, cm);
            row.err_exact = e.err;
            row.err_tail = e.tail_bound;
            row.err_bound = b.bound;
            row.cost_exact = c.exact;
            row.cost_bound = c.bound;
            row.extra["points"] = double(F.size());
            row.extra["zero_rules"] = double(b.zero_rules);
            const double q = F.apply([&](const AnchoredPoint& x) { return eval_test_function(tf, x); });
            row.extra["tf_abs_err"] = std::fabs(q - 1.0);
            row.extra["tf_err_limit"] = (b.bound) * f_norm;
            row.extra["tf_termwise_gap"] = std::fabs(q - mdm_termwise_integral(P, fam, tf));
          } else {
            const MdmApprox M = assemble_approx(P, afam);
            const ApproxTestError e = mdm_approx_error(M, afam, tf, s);
            row.err_exact = e.relative;
            row.err_tail = e.relative_tail;
            detail::CompensatedSum cs;
            for (const auto& x : M.points) cs.add(cm(long(x.act())));
            row.cost_exact = double(cs.value());
            row.cost_bound = detail::approx_cost_bound(P, cm);
            row.extra["points"] = double(M.points.size());
            row.extra["l2_abs_err"] = e.l2;
          }
          stamp(row, start);
          rep.rows.push_back(std::move(row));
        }
        break;
      }
    }
  } catch (const std::exception& e) {
    rep.error = e.what();
  }
  rep.fit = fit_rows(rep.rows, is_mdm(cfg.problem));
  return rep;
}

}  // namespace hermite
