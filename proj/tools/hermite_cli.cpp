// hermite_cli: command line front end.
//   kernel   evaluate k_j(x, y) or the product kernel K at anchored points
//   quad     build a univariate rule, write it, report its worst-case error
//   approx   build a least-squares approximant, report its L2 error, apply it
//   mdm      plan | assemble | run
//   study    run a study config and emit CSV / JSON-lines / plot data
//   check    quick invariant checks
// Environment: HERMITE_OUTPUT_DIR (output directory), HERMITE_THREADS.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "hermite/harness.hpp"
#include "hermite/kernel.hpp"
#include "hermite/weights.hpp"

using namespace hermite;

namespace {

// "1:0.3,4:-1.2" -> active entries
AnchoredPoint parse_point(double anchor, const std::string& text) {
  std::vector<AnchoredPoint::Entry> e;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    const auto c = item.find(':');
    if (c == std::string::npos) throw std::invalid_argument("point: expected j:x, got " + item);
    e.push_back({std::stol(item.substr(0, c)), detail::parse_num(item.substr(c + 1))});
  }
  return AnchoredPoint(anchor, e);
}

std::ofstream open_out(const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  return os;
}

std::ifstream open_in(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open " + path);
  return is;
}

void print_report(const char* what, const ErrorReport& e) {
  std::printf("%s %.15e tail %.3e cost %ld certified %s\n", what, e.err, e.tail_bound, e.cost,
              e.certified ? "yes" : "no");
}

struct MdmOpts {
  std::string scheme = "pg r=log(2,3)";
  double eps = 0.1, kappa = 0.8, delta = 0.6, anchor = 0.0;
  std::string C0 = "auto", C1 = "auto";
  long calib_n_max = 1000;
  int rule_r = 2, lead = 3;
  double quad_delta = 0.2;
  std::string cost = "affine:1,1";
};

void add_mdm_opts(CLI::App* c, MdmOpts& o) {
  c->add_option("--scheme", o.scheme, "weight scheme")->capture_default_str();
  c->add_option("--eps", o.eps, "target accuracy")->capture_default_str();
  c->add_option("--kappa", o.kappa)->capture_default_str();
  c->add_option("--delta", o.delta)->capture_default_str();
  c->add_option("--anchor", o.anchor)->capture_default_str();
  c->add_option("--C0", o.C0, "number or auto")->capture_default_str();
  c->add_option("--C1", o.C1, "number or auto")->capture_default_str();
  c->add_option("--calib-n-max", o.calib_n_max)->capture_default_str();
  c->add_option("--rule-r", o.rule_r)->capture_default_str();
  c->add_option("--quad-delta", o.quad_delta)->capture_default_str();
  c->add_option("--lead", o.lead)->capture_default_str();
  c->add_option("--cost", o.cost)->capture_default_str();
}

std::pair<double, double> resolve_constants(const MdmOpts& o, const WeightScheme& s, const LevelFamily& fam) {
  double C0 = o.C0 == "auto" ? 0.0 : detail::parse_num(o.C0);
  double C1 = o.C1 == "auto" ? 0.0 : detail::parse_num(o.C1);
  if (C0 == 0.0 || C1 == 0.0) {
    GramCache cache(s, fam);
    const auto cu = c_up(s, o.anchor, 1e-12);
    const auto cal = calibrate_smolyak(cache, o.kappa, o.calib_n_max, cu.value + cu.tail_bound);
    C0 = cal.C0;
    C1 = cal.C1;
    std::fprintf(stderr, "calibrated C0 %.6f C1 %.6f from %zu samples\n", C0, C1, cal.samples.size());
  }
  return {C0, C1};
}

int run_check() {
  int failed = 0;
  auto report = [&](const char* name, bool ok, const std::string& detail) {
    std::printf("%s %s: %s\n", ok ? "PASS" : "FAIL", name, detail.c_str());
    if (!ok) ++failed;
  };
  {
    auto [x, w] = detail::gauss_hermite(40);
    double worst = 0.0;
    for (long a = 0; a <= 30; ++a)
      for (long b = 0; b <= 30; ++b) {
        long double g = 0.0L;
        for (std::size_t i = 0; i < x.size(); ++i) g += (long double)(w[i]) * hermite_eval(a, x[i]) * hermite_eval(b, x[i]);
        worst = std::max(worst, double(std::fabs(g - (a == b ? 1.0L : 0.0L))));
      }
    char buf[64];
    std::snprintf(buf, sizeof buf, "max Gram deviation %.1e", worst);
    report("hermite orthonormality", worst < 1e-12, buf);
  }
  {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> d(-4, 4);
    bool ok = true;
    for (const auto& s : {WeightScheme::univariate_pg(2.0), WeightScheme::univariate_eg(1.0, 1.0)})
      for (int t = 0; t < 100; ++t) {
        const double x = d(rng), y = d(rng);
        const auto a = kernel_eval_1d(s, 1, x, y, 1e-10), b = kernel_eval_1d(s, 1, y, x, 1e-10);
        const auto dx = kernel_eval_1d(s, 1, x, x, 1e-10), dy = kernel_eval_1d(s, 1, y, y, 1e-10);
        ok = ok && std::fabs(a.value - b.value) <= a.tail_bound + b.tail_bound + 1e-14;
        ok = ok && a.value * a.value <= (dx.value + dx.tail_bound) * (dy.value + dy.tail_bound) + 1e-12;
      }
    report("kernel symmetry and Cauchy-Schwarz", ok, "200 pairs");
  }
  {
    auto f = [](const AnchoredPoint& x) { return std::exp(0.3 * x[1] * x[2] + 0.1 * x[3]); };
    AnchoredPoint x(0.2, {{1, 0.7}, {2, -1.1}, {3, 0.4}});
    long double sum = 0.0L;
    for (unsigned m = 0; m < 8; ++m) {
      std::vector<long> u;
      std::vector<AnchoredPoint::Entry> e;
      for (unsigned b = 0; b < 3; ++b)
        if ((m >> b) & 1u) {
          u.push_back(long(b) + 1);
          e.push_back(x.active()[b]);
        }
      if (u.empty()) {
        sum += f(AnchoredPoint(0.2));
        continue;
      }
      for (const auto& [p, sg] : anchored_component_points(u, AnchoredPoint(0.2, e))) sum += sg * f(p);
    }
    const double dev = double(std::fabs(sum - f(x)));
    report("anchored reconstruction", dev < 1e-12, std::to_string(dev));
  }
  {
    auto s = WeightScheme::parse("pg r=log(2,3)");
    LevelFamily fam;
    const auto F = assemble(plan(s, 0.1, 0.8, 0.6, 0.0, 3.0, 0.5), fam);
    const double dev = std::fabs(F.weight_sum() - 1.0);
    report("flat rule integrates constants", dev < 1e-12, std::to_string(F.size()) + " points");
  }
  {
    const std::string cfg = "[study]\nproblem = INT_1D\n[scheme]\nspec = pg1 r=2\n[sweep]\nn = 8,16,32,64\n";
    std::ostringstream a, b;
    write_csv(a, run_study(parse_config_string(cfg)));
    write_csv(b, run_study(parse_config_string(cfg)));
    report("study determinism", a.str() == b.str(), "INT_1D rerun");
  }
  return failed ? 1 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Hermite space integration and approximation toolkit"};
  app.require_subcommand(1);

  // kernel
  auto* kc = app.add_subcommand("kernel", "evaluate k_j(x,y) or K(x,y)");
  std::string k_scheme = "pg1 r=2", k_px, k_py;
  double k_x = 0.0, k_y = 0.0, k_tol = 1e-12, k_anchor = 0.0;
  long k_j = 1;
  kc->add_option("--scheme", k_scheme)->capture_default_str();
  kc->add_option("--x", k_x);
  kc->add_option("--y", k_y);
  kc->add_option("--j", k_j, "coordinate")->capture_default_str();
  kc->add_option("--tol", k_tol)->capture_default_str();
  kc->add_option("--anchor", k_anchor, "anchor for product mode")->capture_default_str();
  kc->add_option("--px", k_px, "product mode: active entries of x, e.g. 1:0.3,4:-1");
  kc->add_option("--py", k_py, "product mode: active entries of y");

  // quad
  auto* qc = app.add_subcommand("quad", "univariate rules");
  long q_n = 64;
  int q_r = 2;
  double q_delta = 0.2, q_tol = 1e-22;
  std::string q_scheme = "pg1 r=2", q_out, q_in;
  qc->add_option("--n", q_n)->capture_default_str();
  qc->add_option("--r", q_r, "rule order")->capture_default_str();
  qc->add_option("--delta", q_delta)->capture_default_str();
  qc->add_option("--scheme", q_scheme)->capture_default_str();
  qc->add_option("--tol", q_tol)->capture_default_str();
  qc->add_option("-o,--out", q_out, "write the rule to this file");
  qc->add_option("--rule", q_in, "read a rule instead of building one");

  // approx
  auto* ac = app.add_subcommand("approx", "least-squares approximants");
  long a_n = 128, a_N = 32;
  std::uint64_t a_seed = 1;
  std::string a_scheme = "pg1 r=2", a_out, a_in, a_tf;
  double a_tol = 1.0;
  ac->add_option("--n", a_n, "sample count")->capture_default_str();
  ac->add_option("--N", a_N, "basis dimension")->capture_default_str();
  ac->add_option("--seed", a_seed)->capture_default_str();
  ac->add_option("--scheme", a_scheme)->capture_default_str();
  ac->add_option("--tol", a_tol, "tail certificate tolerance")->capture_default_str();
  ac->add_option("-o,--out", a_out, "write the approximant to this file");
  ac->add_option("--file", a_in, "read an approximant instead of building one");
  ac->add_option("--apply", a_tf, "print Hermite coefficients of A g for g = 1 + c h_nu, given as nu:c");

  // mdm
  auto* mc = app.add_subcommand("mdm", "multivariate decomposition method");
  mc->require_subcommand(1);
  MdmOpts mo;
  std::string m_plan_out, m_plan_in, m_rule_out;
  auto* mp = mc->add_subcommand("plan", "active sets and budgets");
  add_mdm_opts(mp, mo);
  mp->add_option("-o,--out", m_plan_out, "write the plan");
  auto* ma = mc->add_subcommand("assemble", "flat rule export");
  add_mdm_opts(ma, mo);
  ma->add_option("--plan", m_plan_in, "read a plan instead of planning");
  ma->add_option("-o,--out", m_rule_out, "write the flat rule");
  auto* mr = mc->add_subcommand("run", "end-to-end eps sweep");
  add_mdm_opts(mr, mo);
  std::vector<double> r_eps;
  std::string r_problem = "MDM_INT", r_tf = "1:1:0.5 2:2:0.5 3:1:0.5", r_dir = ".", r_stem = "mdm";
  std::uint64_t r_seed = 1;
  mr->add_option("--eps-grid", r_eps, "decreasing eps values")->delimiter(',');
  mr->add_option("--problem", r_problem, "MDM_INT or MDM_APPROX")->capture_default_str();
  mr->add_option("--test-function", r_tf)->capture_default_str();
  mr->add_option("--seed", r_seed)->capture_default_str();
  mr->add_option("--out-dir", r_dir)->capture_default_str();
  mr->add_option("--stem", r_stem)->capture_default_str();

  // study
  auto* sc = app.add_subcommand("study", "run a study config");
  std::string s_cfg, s_dir, s_stem;
  sc->add_option("config", s_cfg, "INI file")->required();
  sc->add_option("--out-dir", s_dir, "override output.dir");
  sc->add_option("--stem", s_stem, "override output.stem");

  // check
  auto* cc = app.add_subcommand("check", "quick invariant checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (kc->parsed()) {
      const auto s = WeightScheme::parse(k_scheme);
      KernelEvalResult r;
      if (!k_px.empty() || !k_py.empty())
        r = kernel_eval_product(s, parse_point(k_anchor, k_px), parse_point(k_anchor, k_py), k_tol);
      else
        r = kernel_eval_1d(s, k_j, k_x, k_y, k_tol);
      std::printf("value %.17g tail %.3e terms %ld certified %s\n", r.value, r.tail_bound, r.terms_used,
                  r.certified ? "yes" : "no");
      return 0;
    }
    if (qc->parsed()) {
      const auto s = WeightScheme::parse(q_scheme);
      Rule1D R;
      if (!q_in.empty()) {
        auto is = open_in(q_in);
        R = read_rule(is);
      } else {
        R = build_An(q_n, q_r, q_delta);
      }
      if (!q_out.empty()) {
        auto os = open_out(q_out);
        write_rule(os, R, s.id());
      }
      std::printf("nodes %zu weight_sum %.17g\n", R.size(), R.weight_sum());
      print_report("err", worst_case_error_int(R, s, 1, q_tol));
      return 0;
    }
    if (ac->parsed()) {
      const auto s = WeightScheme::parse(a_scheme);
      Approx1D ap;
      if (!a_in.empty()) {
        auto is = open_in(a_in);
        ap = read_approx(is);
      } else {
        ap = build_ls_approx(a_n, a_N, a_seed);
      }
      if (!a_out.empty()) {
        auto os = open_out(a_out);
        write_approx(os, ap, s.id());
      }
      std::printf("samples %zu basis %ld condition %.6g\n", ap.size(), ap.basis_dim, ap.condition);
      if (!a_tf.empty()) {
        auto tf = parse_test_function("1:" + a_tf);
        auto c = ap.apply([&](double x) { return tf.factor(0, x); });
        for (Eigen::Index k = 0; k < c.size(); ++k) std::printf("%ld %.17g\n", long(k), c(k));
        return 0;
      }
      print_report("err", worst_case_error_l2(ap, s, 1, -1, a_tol));
      std::printf("lower_bound %.15e\n", spectral_lower_bound(s, 1, long(ap.size())));
      return 0;
    }
    if (mc->parsed()) {
      const auto s = WeightScheme::parse(mo.scheme);
      const LevelFamily fam(mo.rule_r, mo.quad_delta, mo.anchor, mo.lead);
      if (mp->parsed() || (ma->parsed() && m_plan_in.empty())) {
        auto [C0, C1] = resolve_constants(mo, s, fam);
        const MdmPlan P = plan(s, mo.eps, mo.kappa, mo.delta, mo.anchor, C0, C1);
        if (mp->parsed()) {
          std::printf("eps %g sets %zu d_eps %d L %.6g\n", P.eps, P.active.size(), P.d_eps, P.L_const);
          for (const auto& as : P.active) {
            std::string u;
            for (long j : as.u) u += (u.empty() ? "" : ",") + std::to_string(j);
            std::printf("{%s} p %.6g n %ld\n", u.c_str(), as.p, as.n);
          }
          if (!m_plan_out.empty()) {
            auto os = open_out(m_plan_out);
            write_plan(os, P);
          }
          return 0;
        }
        const FlatRule F = assemble(P, fam);
        std::printf("points %zu weight_sum %.17g\n", F.size(), F.weight_sum());
        if (!m_rule_out.empty()) {
          auto os = open_out(m_rule_out);
          write_flat_rule(os, F);
        }
        return 0;
      }
      if (ma->parsed()) {
        auto is = open_in(m_plan_in);
        const MdmPlan P = read_plan(is);
        const FlatRule F = assemble(P, LevelFamily(mo.rule_r, mo.quad_delta, P.a, mo.lead));
        std::printf("points %zu weight_sum %.17g\n", F.size(), F.weight_sum());
        if (!m_rule_out.empty()) {
          auto os = open_out(m_rule_out);
          write_flat_rule(os, F);
        }
        return 0;
      }
      // run: a study assembled from the flags
      StudyConfig cfg;
      cfg.problem = parse_problem(r_problem);
      cfg.scheme = mo.scheme;
      cfg.eps_grid = r_eps.empty() ? std::vector<double>{mo.eps} : r_eps;
      cfg.kappa = mo.kappa;
      cfg.delta = mo.delta;
      cfg.anchor = mo.anchor;
      cfg.C0 = mo.C0 == "auto" ? 0.0 : detail::parse_num(mo.C0);
      cfg.C1 = mo.C1 == "auto" ? 0.0 : detail::parse_num(mo.C1);
      cfg.calib_n_max = mo.calib_n_max;
      cfg.rule_r = mo.rule_r;
      cfg.quad_delta = mo.quad_delta;
      cfg.lead = mo.lead;
      cfg.cost = mo.cost;
      cfg.test_function = r_tf;
      cfg.seed = r_seed;
      cfg.out_dir = r_dir;
      if (const char* env = std::getenv("HERMITE_OUTPUT_DIR"); env && *env) cfg.out_dir = env;
      cfg.stem = r_stem;
      cfg.validate();
      const auto rep = run_study(cfg);
      for (const auto& f : emit(rep)) std::fprintf(stderr, "wrote %s\n", f.c_str());
      std::printf("%s\n", summary_json(rep).dump().c_str());
      return rep.error.empty() ? 0 : 2;
    }
    if (sc->parsed()) {
      auto is = open_in(s_cfg);
      StudyConfig cfg = parse_config(is);
      if (!s_dir.empty()) cfg.out_dir = s_dir;
      if (!s_stem.empty()) cfg.stem = s_stem;
      const auto rep = run_study(cfg);
      for (const auto& f : emit(rep)) std::fprintf(stderr, "wrote %s\n", f.c_str());
      std::printf("%s\n", summary_json(rep).dump().c_str());
      return rep.error.empty() ? 0 : 2;
    }
    if (cc->parsed()) return run_check();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
