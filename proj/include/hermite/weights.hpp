#pragma once
// Constants derived from a weight scheme: gamma_j, rho, c_up, C_up, c_down, beta_n.

#include <cmath>
#include <stdexcept>
#include <vector>

#include "kernel.hpp"
#include "weight_scheme.hpp"

namespace hermite {

inline double gamma(const WeightScheme& s, long j) { return s.gamma(j); }

inline double gamma_u(const WeightScheme& s, const std::vector<long>& u) {
  double g = 1.0;
  for (long j : u) g *= s.gamma(j);
  return g;
}

// liminf_j r_j ln 2 / ln j, from the generator form.
inline double rho(const WeightScheme& s) {
  if (s.kind() == SchemeKind::Custom || s.dimension() != 0)
    throw std::invalid_argument("rho: needs a multivariate PG or EG scheme");
  return s.r_gen().growth_rate();
}

// 1 + k_1(a, a)
inline KernelEvalResult c_up(const WeightScheme& s, double a, double tol, const KernelOptions& opt = {}) {
  auto k = kernel_eval_1d(s, 1, a, a, tol, opt);
  k.value += 1.0;
  return k;
}

// prod_j (1 + gamma_j c_up(a))^{1/2}, with the product tail bounded through sum_{j>J} gamma_j.
inline KernelEvalResult C_up(const WeightScheme& s, double a, double tol, const KernelOptions& opt = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("C_up: tol must be positive");
  const double gsum = s.gamma_tail(0, 1.0);
  if (!std::isfinite(gsum)) throw std::domain_error("C_up: sum of gamma_j diverges");
  double ctol = tol / (4.0 * (1.0 + gsum));
  for (int attempt = 0; attempt < 6; ++attempt) {
    auto c = c_up(s, a, ctol, opt);
    const double clo = c.value - c.tail_bound, chi = c.value + c.tail_bound;
    long double lo = 0.0L, mid = 0.0L, hi = 0.0L;
    long J = 0;
    const long jcap = 100'000'000;
    double rem = 0.0;
    for (;;) {
      rem = 0.5 * chi * s.gamma_tail(J, 1.0);
      // stop when the remaining log-mass is small relative to tol
      if (rem * std::exp(double(hi)) <= 0.25 * tol) break;
      if (s.dimension() != 0 && J >= s.dimension()) break;
      if (J >= jcap) throw ToleranceError("C_up: product did not converge", rem);
      ++J;
      const double g = s.gamma(J);
      lo += 0.5L * std::log1p(g * clo);
      mid += 0.5L * std::log1p(g * c.value);
      hi += 0.5L * std::log1p(g * chi);
    }
    const double vlo = std::exp(double(lo)), vhi = std::exp(double(hi) + rem);
    const double v = std::exp(double(mid));
    const double tail = std::max(vhi - v, v - vlo);
    if (tail <= tol) return {v, tail, J, c.certified};
    ctol *= 0.5 * tol / tail;
  }
  throw ToleranceError("C_up: tolerance unreachable", tol);
}

// (1 + alpha_{1,1} + a^2)^{-1}
inline double c_down(const WeightScheme& s, double a) { return 1.0 / (1.0 + s.alpha(1, 1) + a * a); }

// anchored kernel c_down(a) (x - a)(y - a)
inline double m_down(const WeightScheme& s, double a, double x, double y) {
  return c_down(s, a) * (x - a) * (y - a);
}

namespace detail {

// sum_{m>=M} m^{-r} for r > 1, M >= 1: explicit head then Euler-Maclaurin.
// The returned error bound is the size of the first omitted correction.
inline std::pair<double, double> hurwitz_tail(double r, long M) {
  CompensatedSum s;
  long m = M;
  const long start = std::max<long>(M, 64);
  for (; m < start; ++m) s.add(std::pow(double(m), -r));
  const double x = double(m);
  const double p = std::pow(x, -r);
  s.add(x * p / (r - 1.0));
  s.add(0.5 * p);
  s.add(r * p / (12.0 * x));
  s.add(-r * (r + 1.0) * (r + 2.0) * p / (720.0 * x * x * x));
  s.add(r * (r + 1.0) * (r + 2.0) * (r + 3.0) * (r + 4.0) * p / (30240.0 * std::pow(x, 5)));
  const double err = r * (r + 1) * (r + 2) * (r + 3) * (r + 4) * (r + 5) * (r + 6) * p / (1209600.0 * std::pow(x, 7));
  return {double(s.value()), std::fabs(err)};
}

}  // namespace detail

// beta_n = ((1/n) sum_{nu>=n} alpha_{nu,j}^{-1})^{1/2}
inline double beta_sequence(const WeightScheme& s, long j, long n, double tol = 1e-12) {
  if (n < 1) throw std::invalid_argument("beta_sequence: n must be >= 1");
  if (s.trivial_coordinate(j)) return 0.0;
  double sum = 0.0, err = 0.0;
  if (s.kind() == SchemeKind::PG) {
    const double r = s.r(j);
    if (r <= 1.0) throw std::domain_error("beta_sequence: weight reciprocals not summable");
    std::tie(sum, err) = detail::hurwitz_tail(r, n + 1);
  } else {
    detail::CompensatedSum acc;
    long nu = n;
    for (;; ++nu) {
      const double t = s.inv_alpha(nu, j);
      acc.add(t);
      const double tail = s.nu_tail(j, nu);
      if (tail <= 1e-17 * double(acc.value()) || tail == 0.0) {
        err = tail;
        break;
      }
      if (nu - n > 50'000'000) throw ToleranceError("beta_sequence: slow convergence", tail);
    }
    sum = double(acc.value()) + err;
  }
  if (err > tol * std::max(sum, 1e-300) && err > tol) throw ToleranceError("beta_sequence: tolerance unreachable", err);
  return std::sqrt(sum / double(n));
}

}  // namespace hermite
