#pragma once
// Univariate quadrature against the standard normal law: composite base rules on
// I = [-1/2, 1/2], shifted Gaussian-weighted rules, the (L_n, m_n) schedule, and
// worst-case errors on H(k_j).

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "detail/numeric.hpp"
#include "detail/parallel.hpp"
#include "kernel.hpp"
#include "polynomials.hpp"
#include "weight_scheme.hpp"

namespace hermite {

struct RuleMeta {
  int r = 0;
  int L = 0;
  double delta = 0.0;
  std::vector<long> m_vec;  // per shift l = -L+1 .. L-1
};

struct Rule1D {
  std::vector<double> nodes;
  std::vector<double> weights;
  std::optional<RuleMeta> meta;

  std::size_t size() const { return nodes.size(); }
  bool empty() const { return nodes.empty(); }
  template <class F>
  double apply(F&& f) const {
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < nodes.size(); ++i) s.add(weights[i] * f(nodes[i]));
    return double(s.value());
  }
  double weight_sum() const {
    detail::CompensatedSum s;
    for (double w : weights) s.add(w);
    return double(s.value());
  }
};

struct ErrorReport {
  double err = 0.0;
  double tail_bound = 0.0;
  long cost = 0;
  bool certified = true;
};

// Composite Gauss-Legendre on I with ceil(r/2) points per panel and ceil(m/q)
// equal panels: exact for piecewise polynomials of degree r-1, all weights positive.
inline Rule1D base_rule(long m, int r) {
  if (m < 1 || r < 1) throw std::invalid_argument("base_rule: need m >= 1 and r >= 1");
  const int q = (r + 1) / 2;
  const long P = (m + q - 1) / q;
  auto [g, gw] = detail::gauss_legendre(q);
  Rule1D out;
  out.nodes.reserve(std::size_t(P * q));
  out.weights.reserve(std::size_t(P * q));
  const double h = 1.0 / double(P);
  for (long p = 0; p < P; ++p) {
    const double c = -0.5 + (double(p) + 0.5) * h;
    for (int k = 0; k < q; ++k) {
      out.nodes.push_back(c + 0.5 * h * g[k]);
      out.weights.push_back(0.5 * h * gw[k]);
    }
  }
  return out;
}

inline Rule1D shifted_rule(int L, const std::vector<long>& m_vec, int r) {
  if (L < 1) throw std::invalid_argument("shifted_rule: L must be >= 1");
  if (m_vec.size() != std::size_t(2 * L - 1))
    throw std::invalid_argument("shifted_rule: m_vec must have 2L-1 entries");
  Rule1D out;
  for (int l = -L + 1; l < L; ++l) {
    const Rule1D b = base_rule(m_vec[std::size_t(l + L - 1)], r);
    for (std::size_t i = 0; i < b.size(); ++i) {
      const double x = b.nodes[i] + double(l);
      const double w = b.weights[i] * detail::gaussian_density(x);
      if (!(w > 0.0)) throw std::runtime_error("shifted_rule: non-positive weight");
      out.nodes.push_back(x);
      out.weights.push_back(w);
    }
  }
  out.meta = RuleMeta{r, L, 0.0, m_vec};
  return out;
}

struct Schedule {
  int L = 0;
  std::vector<long> m_vec;
  long total() const {
    long t = 0;
    for (long m : m_vec) t += m;
    return t;
  }
};

// L_n = ceil((r/delta ln n)^{1/2}),  m_{l,n} = ceil(n exp(-delta l^2 / (2r)))
inline Schedule schedule(long n, int r, double delta) {
  if (n < 2) throw std::invalid_argument("schedule: n must be >= 2");
  if (r < 1) throw std::invalid_argument("schedule: r must be >= 1");
  if (!(delta > 0.0 && delta < 0.25)) throw std::invalid_argument("schedule: delta must lie in (0, 1/4)");
  Schedule s;
  s.L = int(std::ceil(std::sqrt(double(r) / delta * std::log(double(n)))));
  for (int l = -s.L + 1; l < s.L; ++l)
    s.m_vec.push_back(long(std::ceil(double(n) * std::exp(-delta * double(l) * double(l) / (2.0 * r)))));
  return s;
}

inline Rule1D build_An(long n, int r, double delta = 0.2) {
  const Schedule s = schedule(n, r, delta);
  Rule1D rule = shifted_rule(s.L, s.m_vec, r);
  rule.meta->delta = delta;
  return rule;
}

enum class ErrorMethod { Auto, Gram, Series, Spectral };

namespace detail {

inline ErrorReport finish_report(double e2, double t, double tol, long cost, bool certified) {
  if (e2 < 0.0) {
    if (e2 < -10.0 * tol - t) throw std::runtime_error("worst-case error: squared error significantly negative");
    e2 = 0.0;
  }
  const double err = std::sqrt(e2);
  // sqrt differences written to avoid cancellation
  const double up = t / (std::sqrt(e2 + t) + err);
  const double lo2 = std::max(e2 - t, 0.0);
  const double dn = err > 0.0 ? (e2 - lo2) / (err + std::sqrt(lo2)) : 0.0;
  return {err, std::max(up, dn), cost, certified};
}

// Q_nu = sum_i w_i h_nu(x_i), nu = 0..N. Node chunks are reduced in a fixed order.
inline std::vector<double> hermite_moments(const std::vector<double>& x, const std::vector<double>& w, long N) {
  const std::size_t n = x.size();
  const std::size_t chunks = std::min<std::size_t>(thread_count(), std::max<std::size_t>(1, n / 64));
  std::vector<std::vector<long double>> part(chunks, std::vector<long double>(std::size_t(N + 1), 0.0L));
  parallel_for(chunks, [&](std::size_t c) {
    auto& acc = part[c];
    const std::size_t lo = n * c / chunks, hi = n * (c + 1) / chunks;
    std::vector<double> h0(hi - lo, 1.0), h1(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      h1[i - lo] = x[i];
      acc[0] += w[i];
      if (N >= 1) acc[1] += (long double)(w[i]) * x[i];
    }
    for (long nu = 2; nu <= N; ++nu) {
      const double a = std::sqrt(double(nu - 1)), b = 1.0 / std::sqrt(double(nu));
      long double s = 0.0L;
      for (std::size_t k = 0; k < hi - lo; ++k) {
        const double h2 = (x[lo + k] * h1[k] - a * h0[k]) * b;
        h0[k] = h1[k];
        h1[k] = h2;
        s += (long double)(w[lo + k]) * h2;
      }
      acc[std::size_t(nu)] = s;
    }
  });
  std::vector<double> Q(std::size_t(N + 1), 0.0);
  for (long nu = 0; nu <= N; ++nu) {
    long double s = 0.0L;
    for (const auto& p : part) s += p[std::size_t(nu)];
    Q[std::size_t(nu)] = double(s);
  }
  return Q;
}

// (sum |w_i|, sum |w_i| e^{x_i^2/4})
inline std::pair<double, double> rule_masses(const Rule1D& rule) {
  long double B = 0.0L, W = 0.0L;
  for (std::size_t i = 0; i < rule.size(); ++i) {
    B += std::fabs(rule.weights[i]);
    W += std::fabs(rule.weights[i]) * std::exp(0.25 * rule.nodes[i] * rule.nodes[i]);
  }
  return {double(B), double(W)};
}

// sum_{i,l} w_i w_l (M_t(x_i, x_l) - 1), with t = e^{-s}, over sorted nodes; only pairs
// closer than the Gaussian band are summed. Returns value and bound on the omitted mass.
inline std::pair<double, double> banded_mehler_form(const std::vector<double>& xs, const std::vector<double>& ws,
                                                    double wsum, double W, double s, double target) {
  const double t = std::exp(-s);
  const double omt2 = -std::expm1(-2.0 * s);
  const double pref = -0.5 * std::log(omt2);
  double E = std::max(40.0, std::log(W * W / target) + pref);
  const double width = std::sqrt(2.0 * omt2 * E / t);
  const std::size_t n = xs.size();
  long double acc = 0.0L;
  std::size_t lo = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (xs[lo] < xs[i] - width) ++lo;
    long double row = 0.0L;
    for (std::size_t l = lo; l < n && xs[l] <= xs[i] + width; ++l) {
      const double d = xs[i] - xs[l];
      const double e = pref - t * d * d / (2.0 * omt2) + t * (xs[i] * xs[i] + xs[l] * xs[l]) / (2.0 * (1.0 + t));
      row += ws[l] * std::exp(e);
    }
    acc += (long double)(ws[i]) * row;
  }
  const double omitted = W * W * std::exp(pref - E);
  return {double(acc - (long double)(wsum) * wsum), omitted};
}

// err^2 for alpha_nu = (nu+1)^r via
//   sum_{nu>=1} (nu+1)^{-r} Q_nu^2 = Gamma(r)^{-1} int s^r e^{-s} F(s) d(ln s),
//   F(s) = sum_{nu>=1} e^{-nu s} Q_nu^2 = w^T (M_{e^{-s}} - 1) w.
// F comes from the moment series for s >= s_star and from the banded Mehler form below.
inline std::pair<double, double> spectral_pg_err2(const Rule1D& rule, double r, double tol) {
  const double wsum = rule.weight_sum();
  const double head = (1.0 - wsum) * (1.0 - wsum);
  if (rule.empty()) return {1.0, 0.0};
  auto [B, W] = rule_masses(rule);
  const double lg = std::lgamma(r);
  const double G = std::exp(lg);
  const double X = 2.0 * std::log(2.0 * W * W / (B * B));
  const auto win = laplace_window(r, X, 1e-3 * tol * G / (B * B));
  double trunc = B * B * win.trunc_bound / G;

  const double s_star = 2e-3;
  const double tau = 1e-4 * tol * G;
  const long Nmax = std::max<long>(
      64, long(std::ceil(std::log(std::max(W * W / (-std::expm1(-s_star) * tau), 2.0)) / s_star)));
  const std::vector<double> Q = hermite_moments(rule.nodes, rule.weights, Nmax);

  std::vector<std::size_t> ord(rule.size());
  for (std::size_t i = 0; i < ord.size(); ++i) ord[i] = i;
  std::sort(ord.begin(), ord.end(), [&](std::size_t a, std::size_t b) { return rule.nodes[a] < rule.nodes[b]; });
  std::vector<double> xs(ord.size()), ws(ord.size());
  for (std::size_t i = 0; i < ord.size(); ++i) xs[i] = rule.nodes[ord[i]], ws[i] = rule.weights[ord[i]];

  auto integrand = [&](double v) -> std::pair<double, double> {
    const double s = std::exp(v);
    const double pw = std::exp(r * v - s - lg);
    double F = 0.0, Ft = 0.0;
    if (s >= s_star) {
      const double q = std::exp(-s);
      long double acc = 0.0L, tq = 1.0L;
      long N = Nmax;
      for (long nu = 1; nu <= Nmax; ++nu) {
        tq *= q;
        acc += tq * (long double)(Q[std::size_t(nu)]) * Q[std::size_t(nu)];
        if (tq * W * W < 1e-3L * (long double)(tau) * (1.0L - q)) {
          N = nu;
          break;
        }
      }
      F = double(acc);
      Ft = W * W * std::exp(-double(N + 1) * s) / (-std::expm1(-s));
    } else {
      std::tie(F, Ft) = banded_mehler_form(xs, ws, wsum, W, s, 1e-4 * tau / std::max(pw * G, 1e-300));
    }
    return {pw * F, pw * Ft};
  };

  // trapezoid in v, refined by halving; new points are the odd ones of the finer grid
  double h = 0.4;
  long K = long(std::ceil((win.vmax - win.vmin) / h));
  std::vector<std::pair<double, double>> g(std::size_t(K + 1));
  parallel_for(g.size(), [&](std::size_t k) { g[k] = integrand(win.vmin + double(k) * h); });
  double Th = 0.0, est = 0.0, tt = 0.0;
  for (int level = 0; level < 4; ++level) {
    std::vector<std::pair<double, double>> odd(static_cast<std::size_t>(K));
    parallel_for(odd.size(), [&](std::size_t k) { odd[k] = integrand(win.vmin + (double(k) + 0.5) * h); });
    std::vector<std::pair<double, double>> fine(std::size_t(2 * K + 1));
    for (long k = 0; k <= K; ++k) fine[std::size_t(2 * k)] = g[std::size_t(k)];
    for (long k = 0; k < K; ++k) fine[std::size_t(2 * k + 1)] = odd[std::size_t(k)];
    g.swap(fine);
    K *= 2;
    h *= 0.5;
    long double full = 0.0L, half = 0.0L, scale = 0.0L, tl = 0.0L;
    for (long k = 0; k <= K; ++k) {
      full += g[std::size_t(k)].first;
      if (k % 2 == 0) half += g[std::size_t(k)].first;
      scale += std::fabs(g[std::size_t(k)].first);
      tl += g[std::size_t(k)].second;
    }
    Th = double(full) * h;
    const double T2h = double(half) * 2.0 * h;
    const double S = double(scale) * h + 1e-300;
    const double rel = std::fabs(Th - T2h) / S;
    // analytic integrand: the error at h is about the square of the relative error at 2h
    est = S * rel * rel * 16.0;
    tt = double(tl) * h;
    if (trunc + est + tt <= tol) break;
  }
  return {head + Th, trunc + est + tt};
}

// err^2 = (1 - sum w)^2 + sum_{nu=1}^N alpha^{-1} Q_nu^2, remainder in [0, W^2 nu_tail(N)].
inline std::pair<double, double> series_err2(const Rule1D& rule, const WeightScheme& s, long j, double tol,
                                             long cap) {
  const double wsum = rule.weight_sum();
  const double head = (1.0 - wsum) * (1.0 - wsum);
  if (rule.empty() || s.trivial_coordinate(j)) return {head, 0.0};
  auto [B, W] = rule_masses(rule);
  long N;
  if (s.kind() == SchemeKind::Custom) {
    N = long(s.table()[std::size_t(j - 1)].size()) - 1;
  } else {
    N = series_length(s, j, W * W, 0.5 * tol, cap);
    if (N < 0) throw ToleranceError("worst_case_error_int: series too long", W * W * s.nu_tail(j, cap));
  }
  const auto Q = hermite_moments(rule.nodes, rule.weights, N);
  long double acc = 0.0L;
  for (long nu = 1; nu <= N; ++nu) acc += (long double)(s.inv_alpha(nu, j)) * Q[std::size_t(nu)] * Q[std::size_t(nu)];
  const double rem = s.kind() == SchemeKind::Custom ? 0.0 : W * W * s.nu_tail(j, N);
  return {head + double(acc) + 0.5 * rem, 0.5 * rem};
}

inline std::pair<double, double> gram_err2(const Rule1D& rule, const WeightScheme& s, long j, double tol,
                                           bool& certified, const KernelOptions& opt) {
  const std::size_t n = rule.size();
  if (n == 0) return {1.0, 0.0};
  auto [B, W] = rule_masses(rule);
  const double et = tol / (B * B);
  std::vector<long double> rows(n, 0.0L);
  std::vector<double> tails(n, 0.0);
  std::vector<char> cert(n, 1);
  parallel_for(n, [&](std::size_t i) {
    long double acc = 0.0L;
    double tl = 0.0;
    for (std::size_t l = 0; l < n; ++l) {
      auto k = kernel_eval_1d(s, j, rule.nodes[i], rule.nodes[l], et, opt);
      acc += (long double)(rule.weights[l]) * k.value;
      tl += std::fabs(rule.weights[l]) * k.tail_bound;
      if (!k.certified) cert[i] = 0;
    }
    rows[i] = (long double)(rule.weights[i]) * acc;
    tails[i] = std::fabs(rule.weights[i]) * tl;
  });
  long double quad = 0.0L;
  double t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    quad += rows[i];
    t += tails[i];
    certified = certified && cert[i];
  }
  const double wsum = rule.weight_sum();
  return {double(1.0L - 2.0L * wsum + quad), t};
}

}  // namespace detail

// Worst-case integration error of the rule on the unit ball of H(k_j).
// tol bounds the absolute uncertainty of err^2.
inline ErrorReport worst_case_error_int(const Rule1D& rule, const WeightScheme& s, long j = 1, double tol = 1e-22,
                                        ErrorMethod method = ErrorMethod::Auto, const KernelOptions& opt = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("worst_case_error_int: tol must be positive");
  for (std::size_t i = 0; i < rule.size(); ++i)
    if (!std::isfinite(rule.nodes[i]) || !std::isfinite(rule.weights[i]))
      throw std::invalid_argument("worst_case_error_int: non-finite node or weight");
  const long cost = long(rule.size());
  if (rule.empty()) return {1.0, 0.0, 0, true};
  if (method == ErrorMethod::Auto)
    method = (s.kind() == SchemeKind::PG && !s.trivial_coordinate(j)) ? ErrorMethod::Spectral : ErrorMethod::Series;
  double e2 = 0.0, t = 0.0;
  bool certified = true;
  switch (method) {
    case ErrorMethod::Spectral:
      if (s.kind() != SchemeKind::PG) throw std::invalid_argument("worst_case_error_int: spectral route needs PG");
      std::tie(e2, t) = detail::spectral_pg_err2(rule, s.r(j), tol);
      certified = false;
      break;
    case ErrorMethod::Series:
      std::tie(e2, t) = detail::series_err2(rule, s, j, tol, opt.term_cap);
      break;
    case ErrorMethod::Gram:
      std::tie(e2, t) = detail::gram_err2(rule, s, j, tol, certified, opt);
      break;
    case ErrorMethod::Auto:
      break;
  }
  if (t > tol) throw ToleranceError("worst_case_error_int: tolerance unreachable", t);
  return detail::finish_report(e2, t, tol, cost, certified);
}

// Plain-text format, version 1:
//   hermite-rule 1
//   r <r> L <L> delta <delta>
//   m <m_{-L+1}> ... <m_{L-1}>
//   scheme <id>
//   n <count>
//   <node> <weight>            (count lines, 17 significant digits)
inline void write_rule(std::ostream& os, const Rule1D& rule, const std::string& scheme_id = "") {
  os << "hermite-rule 1\n";
  if (rule.meta) {
    os << "r " << rule.meta->r << " L " << rule.meta->L << " delta " << detail::fmt_num(rule.meta->delta) << "\n";
    os << "m";
    for (long m : rule.meta->m_vec) os << ' ' << m;
    os << "\n";
  }
  if (!scheme_id.empty()) os << "scheme " << scheme_id << "\n";
  os << "n " << rule.size() << "\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < rule.size(); ++i) os << rule.nodes[i] << ' ' << rule.weights[i] << "\n";
  if (!os) throw std::runtime_error("write_rule: stream error");
}

inline Rule1D read_rule(std::istream& is, std::string* scheme_id = nullptr) {
  std::string line, key;
  if (!std::getline(is, line) || line != "hermite-rule 1") throw std::runtime_error("read_rule: bad header");
  Rule1D rule;
  RuleMeta meta;
  bool has_meta = false;
  long count = -1;
  while (count < 0 && std::getline(is, line)) {
    std::istringstream ls(line);
    ls >> key;
    if (key == "r") {
      std::string kL, kd, dv;
      ls >> meta.r >> kL >> meta.L >> kd >> dv;
      meta.delta = detail::parse_num(dv);
      has_meta = true;
    } else if (key == "m") {
      long m;
      while (ls >> m) meta.m_vec.push_back(m);
    } else if (key == "scheme") {
      std::string id;
      std::getline(ls >> std::ws, id);
      if (scheme_id) *scheme_id = id;
    } else if (key == "n") {
      ls >> count;
    } else {
      throw std::runtime_error("read_rule: unknown key '" + key + "'");
    }
  }
  if (count < 0) throw std::runtime_error("read_rule: missing node count");
  for (long i = 0; i < count; ++i) {
    double x, w;
    if (!(is >> x >> w)) throw std::runtime_error("read_rule: truncated node list");
    rule.nodes.push_back(x);
    rule.weights.push_back(w);
  }
  if (has_meta) rule.meta = meta;
  return rule;
}

}  // namespace hermite
