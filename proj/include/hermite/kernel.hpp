#pragma once
// Evaluation of univariate Hermite kernels k_j and the product kernel K.
//
// Three routes for k_j(x, y) = 1 + sum_{nu>=1} alpha_{nu,j}^{-1} h_nu(x) h_nu(y):
//  * truncated series with the Cramer tail 0.5 (e^{x^2/2} + e^{y^2/2}) sum_{nu>N} alpha^{-1};
//  * Mehler's closed form when alpha_nu = 2^{r nu} (EG with b = 1);
//  * for PG, the Laplace representation
//      (nu+1)^{-r} = Gamma(r)^{-1} int_0^inf s^{r-1} e^{-(nu+1)s} ds
//    which turns the series into an integral of Mehler kernels with t = e^{-s};
//    the integral is a trapezoid sum in v = ln s (analytic in a strip, so the
//    error decays like exp(-pi^2/h)). Its error estimate is a posteriori, so
//    results from this route carry certified = false.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchored_point.hpp"
#include "detail/numeric.hpp"
#include "polynomials.hpp"
#include "weight_scheme.hpp"

namespace hermite {

struct KernelEvalResult {
  double value = 0.0;
  double tail_bound = 0.0;
  long terms_used = 0;
  bool certified = true;
};

class ToleranceError : public std::runtime_error {
public:
  ToleranceError(const std::string& what, double best_tail)
      : std::runtime_error(what), best_tail_(best_tail) {}
  double best_tail() const { return best_tail_; }

private:
  double best_tail_;
};

struct KernelOptions {
  long term_cap = 1L << 22;     // max series length
  bool allow_integral = true;   // allow the Laplace route for PG when the series is too long
  long prefer_integral_above = std::numeric_limits<long>::max();  // switch to Laplace earlier
};

namespace detail {

// Mehler kernel sum_nu t^nu h_nu(x) h_nu(y) minus 1, for t = e^{-s}, s > 0.
inline double mehler_minus_one(double s, double x, double y) {
  const double t = std::exp(-s);
  const double omt2 = -std::expm1(-2.0 * s);
  const double d = x - y;
  const double e = -t * d * d / (2.0 * omt2) + t * (x * x + y * y) / (2.0 * (1.0 + t));
  return std::expm1(-0.5 * std::log(omt2) + e);
}

inline double mehler(double t, double x, double y) {
  const double omt2 = 1.0 - t * t;
  const double d = x - y;
  return std::exp(-0.5 * std::log(omt2) - t * d * d / (2.0 * omt2) + t * (x * x + y * y) / (2.0 * (1.0 + t)));
}

// Integration window in v = ln s for integrands s^r e^{-s} G(s) where
// |G(s)| <= s^{-1/2} e^{X/2} + 1 near 0 and |G(s)| <= 2 e^{-s} e^{X/2} for s >= ln 2.
struct LaplaceWindow {
  double vmin, vmax, trunc_bound;
};

inline LaplaceWindow laplace_window(double r, double X, double target) {
  target = std::max(target, 1e-300);
  const double rh = r - 0.5;
  double vmin = (std::log(target * rh) - 0.5 * X) / rh;
  vmin = std::min(vmin, -3.0);
  double lower = std::exp(rh * vmin + 0.5 * X) / rh + std::exp(r * vmin) / r;
  double vmax = std::log(r + 2.0);
  auto upper_at = [&](double v) {
    double s = std::exp(v);
    if (2.0 * s <= r + 1.0) return kInf;
    return 2.0 * std::exp(r * v - 2.0 * s + 0.5 * X) / (2.0 * s - r);
  };
  while (upper_at(vmax) > target) vmax += 0.25;
  return {vmin, vmax, lower + upper_at(vmax)};
}

// k(x,y) for alpha_nu = (nu+1)^r via the Laplace-Mehler integral.
inline KernelEvalResult laplace_pg_kernel(double r, double x, double y, double tol) {
  if (!(r > 0.5)) throw std::invalid_argument("laplace_pg_kernel: r must exceed 1/2");
  const double X = std::max(x * x, y * y);
  const double lg = std::lgamma(r);
  auto win = laplace_window(r, X, 1e-3 * tol * std::exp(lg));
  double h = 0.2;
  for (int attempt = 0; attempt < 6; ++attempt) {
    const long K = long(std::ceil((win.vmax - win.vmin) / h));
    CompensatedSum full, half;
    long double scale = 0.0L;
    for (long k = 0; k <= K; ++k) {
      const double v = win.vmin + double(k) * h;
      const double s = std::exp(v);
      const double f = std::exp(r * v - s - lg) * mehler_minus_one(s, x, y);
      full.add(f);
      if (k % 2 == 0) half.add(f);
      scale += std::fabs(f);
    }
    const double Th = double(full.value()) * h;
    const double T2h = double(half.value()) * 2.0 * h;
    const double S = double(scale) * h + 1e-300;
    const double rel = std::fabs(Th - T2h) / S;
    // trapezoid error in a strip squares when h halves: err(h) ~ err(2h)^2 / S
    const double est = S * rel * rel * 16.0 + win.trunc_bound * std::exp(-lg);
    if (est <= tol || attempt == 5) {
      return {1.0 + Th, est, K + 1, false};
    }
    h *= 0.5;
  }
  return {};
}

// Series length N with Cramer tail below target, or -1 if not within cap.
inline long series_length(const WeightScheme& s, long j, double E, double target, long cap) {
  if (s.kind() == SchemeKind::PG) {
    const double r = s.r(j);
    if (r <= 1.0) return -1;
    // (N+1)^{1-r}/(r-1) <= target/E
    double n1 = std::pow(target * (r - 1.0) / E, 1.0 / (1.0 - r));
    if (!(n1 < double(cap) + 2.0)) return -1;
    long N = std::max<long>(1, long(std::ceil(n1)) - 1);
    while (N > 1 && E * s.nu_tail(j, N - 1) <= target) --N;
    while (E * s.nu_tail(j, N) > target) {
      if (++N > cap) return -1;
    }
    return N;
  }
  long hi = 8;
  while (E * s.nu_tail(j, hi) > target) {
    if (hi >= cap) return -1;
    hi = std::min(cap, hi * 2);
  }
  long lo = hi / 2;
  while (lo + 1 < hi) {
    long mid = (lo + hi) / 2;
    if (E * s.nu_tail(j, mid) <= target) hi = mid;
    else lo = mid;
  }
  return hi;
}

inline double series_kernel(const WeightScheme& s, long j, double x, double y, long N) {
  CompensatedSum acc;
  acc.add(1.0);
  double hx0 = 1.0, hx1 = x, hy0 = 1.0, hy1 = y;
  if (N >= 1) acc.add(s.inv_alpha(1, j) * x * y);
  for (long k = 2; k <= N; ++k) {
    const double a = std::sqrt(double(k - 1)), b = 1.0 / std::sqrt(double(k));
    double hx2 = (x * hx1 - a * hx0) * b;
    double hy2 = (y * hy1 - a * hy0) * b;
    hx0 = hx1, hx1 = hx2, hy0 = hy1, hy1 = hy2;
    const double w = s.inv_alpha(k, j);
    if (w == 0.0) break;
    acc.add(w * hx1 * hy1);
  }
  return double(acc.value());
}

}  // namespace detail

inline KernelEvalResult kernel_eval_1d(const WeightScheme& s, long j, double x, double y, double tol,
                                       const KernelOptions& opt = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("kernel_eval_1d: tol must be positive");
  if (j < 1) throw std::invalid_argument("kernel_eval_1d: j must be >= 1");
  if (!std::isfinite(x) || !std::isfinite(y)) throw std::invalid_argument("kernel_eval_1d: non-finite argument");
  if (s.trivial_coordinate(j)) return {1.0, 0.0, 0, true};

  if (s.kind() == SchemeKind::Custom) {
    const long N = long(s.table()[j - 1].size()) - 1;
    return {detail::series_kernel(s, j, x, y, N), 0.0, N, true};
  }
  if (s.kind() == SchemeKind::EG && s.b(j) == 1.0) {
    return {detail::mehler(std::exp2(-s.r(j)), x, y), 0.0, 0, true};
  }

  const double E = 0.5 * (std::exp(0.5 * x * x) + std::exp(0.5 * y * y));
  const long N = detail::series_length(s, j, E, tol, opt.term_cap);
  const bool laplace_ok = opt.allow_integral && s.kind() == SchemeKind::PG;
  if (N >= 0 && !(laplace_ok && N > opt.prefer_integral_above)) {
    const double v = detail::series_kernel(s, j, x, y, N);
    return {v, E * s.nu_tail(j, N), N, true};
  }
  if (laplace_ok) {
    auto res = detail::laplace_pg_kernel(s.r(j), x, y, tol);
    if (res.tail_bound <= tol) return res;
    throw ToleranceError("kernel_eval_1d: integral route did not reach tolerance", res.tail_bound);
  }
  throw ToleranceError("kernel_eval_1d: tolerance unreachable within the term cap",
                       E * s.nu_tail(j, opt.term_cap));
}

namespace detail {

// |prod v_i - prod f_i| <= prod(|v_i| + t_i) - prod |v_i|
struct ProductBound {
  long double value = 1.0L;
  long double absval = 1.0L;
  long double upper = 1.0L;
  bool certified = true;
  void mul(double v, double t, bool cert = true) {
    value *= v;
    absval *= std::fabs(v);
    upper *= std::fabs(v) + t;
    certified = certified && cert;
  }
  double tail() const { return double(upper - absval); }
};

// prod_{j not in skip} k_j(a,a) with per-factor tolerances scaled by tol_scale;
// stops once the analytic remainder falls below rem_target.
inline ProductBound anchored_product(const WeightScheme& s, double a, const std::vector<long>& skip,
                                     double tol_scale, double rem_target, const KernelOptions& opt,
                                     long* factors_used = nullptr) {
  ProductBound pb;
  const double ea = std::exp(0.5 * a * a);
  const long jcap = 50'000'000;
  long j = 1;
  for (;; ++j) {
    const double ct = s.coord_tail(j - 1);
    if (std::isfinite(ct)) {
      const double R = std::expm1(ea * ct);
      if (double(pb.upper) * R <= rem_target) {
        // remaining factors lie in [1, 1 + R]
        pb.mul(1.0 + 0.5 * R, 0.5 * R);
        break;
      }
    }
    if (s.dimension() != 0 && j > s.dimension()) break;
    if (j > jcap) throw ToleranceError("anchored product: too many factors", double(pb.upper) * std::expm1(ea * ct));
    if (std::binary_search(skip.begin(), skip.end(), j)) continue;
    const double tj = tol_scale / (double(j) * double(j));
    auto k = kernel_eval_1d(s, j, a, a, tj, opt);
    pb.mul(k.value, k.tail_bound, k.certified);
  }
  if (factors_used) *factors_used = j;
  return pb;
}

}  // namespace detail

// prod_{j>=1} k_j(a,a), the kernel diagonal at the fully anchored point.
inline KernelEvalResult anchored_diagonal(const WeightScheme& s, double a, double tol,
                                          const KernelOptions& opt = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("anchored_diagonal: tol must be positive");
  double scale = tol / 8.0;
  for (int attempt = 0; attempt < 8; ++attempt) {
    long used = 0;
    auto pb = detail::anchored_product(s, a, {}, scale, tol / 4.0, opt, &used);
    if (pb.tail() <= tol) return {double(pb.value), pb.tail(), used, pb.certified};
    scale *= 0.5 * tol / pb.tail();
  }
  throw ToleranceError("anchored_diagonal: tolerance unreachable", tol);
}

inline KernelEvalResult kernel_eval_product(const WeightScheme& s, const AnchoredPoint& x,
                                            const AnchoredPoint& y, double tol,
                                            const KernelOptions& opt = {}) {
  if (!(tol > 0.0)) throw std::invalid_argument("kernel_eval_product: tol must be positive");
  if (x.anchor() != y.anchor()) throw std::invalid_argument("kernel_eval_product: anchors differ");
  const double a = x.anchor();
  std::vector<long> U;
  for (const auto& e : x.active()) U.push_back(e.first);
  for (const auto& e : y.active()) U.push_back(e.first);
  std::sort(U.begin(), U.end());
  U.erase(std::unique(U.begin(), U.end()), U.end());

  double scale = tol / 8.0;
  double last = kInf;
  for (int attempt = 0; attempt < 8; ++attempt) {
    long used = 0;
    auto pb = detail::anchored_product(s, a, U, scale, tol / 4.0, opt, &used);
    for (long j : U) {
      auto k = kernel_eval_1d(s, j, x[j], y[j], scale / double(U.size()), opt);
      pb.mul(k.value, k.tail_bound, k.certified);
    }
    last = pb.tail();
    if (last <= tol) return {double(pb.value), last, used, pb.certified};
    scale *= 0.5 * tol / last;
  }
  throw ToleranceError("kernel_eval_product: tolerance unreachable", last);
}

}  // namespace hermite
