#pragma once
// Weighted least-squares approximation in L2(mu0) from point values, and its
// worst-case error on the unit ball of H(k_j).
//
// Sample points come from the mixture 1/2 mu0 + 1/2 (1/N) sum_{nu<N} h_nu^2 mu0.
// Drawing exactly n = O(N) points leaves the normal equations badly conditioned
// for large N, so by default a pool of 16N draws is thinned to n points.
// Large nodes make h_nu(x) of size e^{x^2/4}; everything is assembled with
// scaled functions hs_nu(x) = h_nu(x) e^{-x^2/4} so nothing overflows.

#include <Eigen/Dense>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "detail/numeric.hpp"
#include "detail/parallel.hpp"
#include "kernel.hpp"
#include "quad1d.hpp"
#include "weight_scheme.hpp"

namespace hermite {

struct Approx1D {
  std::vector<double> nodes;
  std::vector<double> node_weights;  // least-squares weights, inverse density ratio
  long basis_dim = 0;                // output lies in span{h_0, ..., h_{N-1}}
  Eigen::MatrixXd output_map;        // N x n: coefficients = output_map * f(nodes)
  Eigen::MatrixXd scaled_map;        // output_map with column i multiplied by e^{x_i^2/4}
  std::uint64_t seed = 0;
  double condition = 1.0;            // of the normalized Gram matrix

  std::size_t size() const { return nodes.size(); }

  template <class F>
  Eigen::VectorXd apply(F&& f) const {
    Eigen::VectorXd v(long(nodes.size()));
    for (std::size_t i = 0; i < nodes.size(); ++i) v(long(i)) = f(nodes[i]);
    return output_map * v;
  }
};

class IllConditioned : public std::runtime_error {
public:
  IllConditioned(const std::string& what, double cond) : std::runtime_error(what), cond_(cond) {}
  double condition() const { return cond_; }

private:
  double cond_;
};

namespace detail {

// hs_nu(x) = h_nu(x) e^{-x^2/4}, nu = 0..N, with periodic rescaling in the recurrence.
inline void scaled_hermite_column(long N, double x, std::vector<double>& out) {
  out.assign(std::size_t(N + 1), 0.0);
  double logs = -0.25 * x * x;
  double h0 = 1.0, h1 = x;
  out[0] = std::exp(logs);
  if (N >= 1) out[1] = x * out[0];
  for (long k = 2; k <= N; ++k) {
    const double h2 = (x * h1 - std::sqrt(double(k - 1)) * h0) / std::sqrt(double(k));
    h0 = h1;
    h1 = h2;
    if (std::fabs(h1) > 1e150) {
      h0 *= 1e-150;
      h1 *= 1e-150;
      logs += 150.0 * std::numbers::ln10;
    }
    out[std::size_t(k)] = h1 * std::exp(logs);
  }
}

// Uniform in (0, 1) from 53 random bits; fixed across platforms.
inline double unit_uniform(std::mt19937_64& gen) { return (double(gen() >> 11) + 0.5) * 0x1.0p-53; }

// CDF of h_nu^2 dmu0:  F_nu = F_{nu-1} - phi h_{nu-1} h_nu / sqrt(nu),  F_0 = Phi.
inline double hermite_square_cdf(long nu, double x) {
  double F = gaussian_cdf(x);
  if (nu == 0) return F;
  std::vector<double> hs;
  scaled_hermite_column(nu, x, hs);
  const double c = 1.0 / std::sqrt(2.0 * std::numbers::pi);
  for (long k = 1; k <= nu; ++k) F -= c * hs[std::size_t(k - 1)] * hs[std::size_t(k)] / std::sqrt(double(k));
  return F;
}

inline double sample_hermite_square(long nu, double u) {
  double lo = -(2.0 * std::sqrt(double(nu)) + 12.0), hi = -lo;
  for (int it = 0; it < 80 && hi - lo > 1e-14 * std::max(1.0, std::fabs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (hermite_square_cdf(nu, mid) < u) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace detail

struct LsOptions {
  double max_cond = 1e8;   // larger condition numbers throw IllConditioned
  bool stratified = true;  // one uniform per stratum within each mixture component
  long pool_factor = 16;   // draw max(n, pool_factor N) points, then keep n of them; <= 1 keeps all draws
};

namespace detail {

inline std::vector<double> draw_mixture(long P, long N, std::mt19937_64& gen, bool stratified) {
  std::vector<double> x(static_cast<std::size_t>(P));
  if (stratified) {
    const long n0 = P / 2, n1 = P - n0;
    for (long k = 0; k < n0; ++k) {
      const double u = (double(k) + unit_uniform(gen)) / double(n0);
      x[std::size_t(k)] = std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
    }
    for (long nu = 0; nu < N; ++nu) {
      const long lo = n1 * nu / N, hi = n1 * (nu + 1) / N;
      for (long k = lo; k < hi; ++k) {
        const double u = (double(k - lo) + unit_uniform(gen)) / double(hi - lo);
        x[std::size_t(n0 + k)] = sample_hermite_square(nu, u);
      }
    }
    return x;
  }
  for (long i = 0; i < P; ++i) {
    const double pick = unit_uniform(gen);
    const double u = unit_uniform(gen);
    if (pick < 0.5) {
      x[std::size_t(i)] = std::numbers::sqrt2 * boost::math::erf_inv(2.0 * u - 1.0);
    } else {
      const long nu = long(gen() % std::uint64_t(N));
      x[std::size_t(i)] = sample_hermite_square(nu, u);
    }
  }
  return x;
}

// rho(x) e^{-x^2/2} with rho = 1/2 + (1/2N) sum_{nu<N} h_nu^2, and hs(x) in out
inline double scaled_density(long N, double x, std::vector<double>& hs) {
  scaled_hermite_column(N - 1, x, hs);
  double q = 0.0;
  for (long k = 0; k < N; ++k) q += hs[std::size_t(k)] * hs[std::size_t(k)];
  return 0.5 * std::exp(-0.5 * x * x) + 0.5 * q / double(N);
}

// Greedy determinant maximization: repeatedly take the column with the largest
// leverage s^T G^{-1} s, starting from G = eps I. Returns sorted indices.
inline std::vector<long> greedy_select(const Eigen::MatrixXd& S, long n) {
  const long P = S.cols();
  const double eps = 1e-6;
  Eigen::MatrixXd V = S / eps;
  std::vector<char> used(std::size_t(P), 0);
  std::vector<long> sel;
  for (long t = 0; t < n; ++t) {
    long best = -1;
    double bl = -1.0;
    for (long i = 0; i < P; ++i) {
      if (used[std::size_t(i)]) continue;
      const double l = S.col(i).dot(V.col(i));
      if (l > bl) bl = l, best = i;
    }
    used[std::size_t(best)] = 1;
    sel.push_back(best);
    const Eigen::VectorXd g = V.col(best);
    const Eigen::RowVectorXd sv = S.col(best).transpose() * V;
    V.noalias() -= g * sv / (1.0 + bl);
  }
  std::sort(sel.begin(), sel.end());
  return sel;
}

}  // namespace detail

// Weighted least squares on span{h_0..h_{N-1}} from n values. Points come from the
// mixture density; with pool_factor > 1 a larger pool is drawn and n points are
// kept by greedy determinant maximization, each keeping its mixture weight.
inline Approx1D build_ls_approx(long n, long N, std::uint64_t seed, const LsOptions& opt = {}) {
  if (N < 1) throw std::invalid_argument("build_ls_approx: N must be >= 1");
  if (n < 2 * N) throw std::invalid_argument("build_ls_approx: need n >= 2N");
  std::mt19937_64 gen(seed);
  const long P = std::max(n, opt.pool_factor > 1 ? opt.pool_factor * N : n);
  const std::vector<double> pool = detail::draw_mixture(P, N, gen, opt.stratified);

  // column i: hs(x_i) / sqrt(rho_i e^{-x_i^2/2}) = sqrt(w_i) h(x_i)
  Eigen::MatrixXd S(N, P);
  Eigen::VectorXd rho_s(P);
  {
    std::vector<double> hs;
    for (long i = 0; i < P; ++i) {
      rho_s(i) = detail::scaled_density(N, pool[std::size_t(i)], hs);
      for (long k = 0; k < N; ++k) S(k, i) = hs[std::size_t(k)] / std::sqrt(rho_s(i));
    }
  }
  std::vector<long> keep;
  if (P > n) {
    keep = detail::greedy_select(S, n);
  } else {
    keep.resize(std::size_t(n));
    for (long i = 0; i < n; ++i) keep[std::size_t(i)] = i;
  }

  Approx1D ap;
  ap.basis_dim = N;
  ap.seed = seed;
  Eigen::MatrixXd Ss(N, n);
  for (long a = 0; a < n; ++a) {
    const long i = keep[std::size_t(a)];
    const double x = pool[std::size_t(i)];
    ap.nodes.push_back(x);
    ap.node_weights.push_back(std::exp(-0.5 * x * x) / rho_s(i));
    Ss.col(a) = S.col(i) / std::sqrt(double(n));
  }
  const Eigen::MatrixXd G = Ss * Ss.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(G, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff(), lmax = es.eigenvalues().maxCoeff();
  ap.condition = lmin > 0.0 ? lmax / lmin : kInf;
  if (!(ap.condition <= opt.max_cond))
    throw IllConditioned("build_ls_approx: ill-conditioned normal equations, re-draw", ap.condition);
  // scaled column a: G^{-1} hs(x_a) / (n rho_s) = G^{-1} Ss_a / sqrt(n rho_s)
  Eigen::MatrixXd R = Ss;
  for (long a = 0; a < n; ++a) R.col(a) /= std::sqrt(rho_s(keep[std::size_t(a)]) * double(n));
  ap.scaled_map = G.ldlt().solve(R);
  ap.output_map = ap.scaled_map;
  for (long a = 0; a < n; ++a)
    ap.output_map.col(a) *= std::exp(-0.25 * ap.nodes[std::size_t(a)] * ap.nodes[std::size_t(a)]);
  return ap;
}

// Worst-case L2(mu0) error of f -> output_map f(nodes) on the unit ball of H(k_j).
// On span{e_nu : nu <= N_trunc}, e_nu = alpha_nu^{-1/2} h_nu, the error is the top
// singular value of (I - P) D with P_{mu,nu} = sum_i C_{mu,i} h_nu(x_i). For the rest,
// ||f - Af|| <= alpha_{N_trunc+1}^{-1/2} + ||C diag(e^{x_i^2/4})|| (n nu_tail(N_trunc))^{1/2}.
inline ErrorReport worst_case_error_l2(const Approx1D& ap, const WeightScheme& s, long j = 1, long N_trunc = -1,
                                       double tol = 1.0) {
  const long N = ap.basis_dim;
  if (N_trunc < 0) N_trunc = std::max<long>(4 * N, 256);
  if (N_trunc < N) throw std::invalid_argument("worst_case_error_l2: N_trunc must be >= basis_dim");
  const long n = long(ap.size());
  const long M = N_trunc + 1;
  if (ap.scaled_map.rows() != N || ap.scaled_map.cols() != n)
    throw std::invalid_argument("worst_case_error_l2: output map has wrong shape");

  Eigen::MatrixXd H(n, M);  // hs_nu(x_i)
  {
    std::vector<double> hs;
    for (long i = 0; i < n; ++i) {
      detail::scaled_hermite_column(N_trunc, ap.nodes[std::size_t(i)], hs);
      for (long k = 0; k < M; ++k) H(i, k) = hs[std::size_t(k)];
    }
  }
  Eigen::MatrixXd E = Eigen::MatrixXd::Identity(M, M);
  E.topRows(N) -= ap.scaled_map * H;
  for (long k = 0; k < M; ++k) E.col(k) *= std::sqrt(s.inv_alpha(k, j));
  const Eigen::MatrixXd EtE = E.transpose() * E;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(EtE, Eigen::EigenvaluesOnly);
  const double sigma = std::sqrt(std::max(es.eigenvalues().maxCoeff(), 0.0));

  // |f(x_i)| e^{-x_i^2/4} <= nu_tail^{1/2} on the unit ball of the omitted span
  const double nt = s.nu_tail(j, N_trunc);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> cs(ap.scaled_map * ap.scaled_map.transpose(),
                                                    Eigen::EigenvaluesOnly);
  const double cnorm = std::sqrt(std::max(cs.eigenvalues().maxCoeff(), 0.0));
  const double tau = std::sqrt(s.inv_alpha(N_trunc + 1, j)) + cnorm * std::sqrt(double(n) * nt);
  if (!(tau <= tol)) throw ToleranceError("worst_case_error_l2: tail certificate above tolerance", tau);
  // err lies in [sigma, sqrt(sigma^2 + tau^2)]
  const double tail = tau * tau / (std::sqrt(sigma * sigma + tau * tau) + sigma);
  return {sigma, tail, n, true};
}

// alpha_{n,j}^{-1/2}: no algorithm using n values beats this.
inline double spectral_lower_bound(const WeightScheme& s, long j, long n) {
  if (n < 0) throw std::invalid_argument("spectral_lower_bound: n must be >= 0");
  return std::sqrt(s.inv_alpha(n, j));
}

// Plain-text format, version 1:
//   hermite-approx 1
//   seed <seed> N <basis_dim> n <count>
//   <node> <weight>                       (count lines)
//   <row of output_map>                   (N lines, count entries each)
inline void write_approx(std::ostream& os, const Approx1D& ap, const std::string& scheme_id = "") {
  os << "hermite-approx 1\n";
  if (!scheme_id.empty()) os << "scheme " << scheme_id << "\n";
  os << "seed " << ap.seed << " N " << ap.basis_dim << " n " << ap.size() << "\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < ap.size(); ++i) os << ap.nodes[i] << ' ' << ap.node_weights[i] << "\n";
  for (long r = 0; r < ap.output_map.rows(); ++r) {
    for (long c = 0; c < ap.output_map.cols(); ++c) os << (c ? " " : "") << ap.scaled_map(r, c);
    os << "\n";
  }
  if (!os) throw std::runtime_error("write_approx: stream error");
}

inline Approx1D read_approx(std::istream& is, std::string* scheme_id = nullptr) {
  std::string line, key;
  if (!std::getline(is, line) || line != "hermite-approx 1") throw std::runtime_error("read_approx: bad header");
  Approx1D ap;
  long n = -1;
  while (n < 0 && std::getline(is, line)) {
    std::istringstream ls(line);
    ls >> key;
    if (key == "scheme") {
      std::string id;
      std::getline(ls >> std::ws, id);
      if (scheme_id) *scheme_id = id;
    } else if (key == "seed") {
      std::string kN, kn;
      ls >> ap.seed >> kN >> ap.basis_dim >> kn >> n;
    } else {
      throw std::runtime_error("read_approx: unknown key '" + key + "'");
    }
  }
  if (n < 0) throw std::runtime_error("read_approx: missing size line");
  ap.nodes.resize(std::size_t(n));
  ap.node_weights.resize(std::size_t(n));
  for (long i = 0; i < n; ++i)
    if (!(is >> ap.nodes[std::size_t(i)] >> ap.node_weights[std::size_t(i)]))
      throw std::runtime_error("read_approx: truncated node list");
  ap.scaled_map.resize(ap.basis_dim, n);
  for (long r = 0; r < ap.basis_dim; ++r)
    for (long c = 0; c < n; ++c)
      if (!(is >> ap.scaled_map(r, c))) throw std::runtime_error("read_approx: truncated map");
  ap.output_map = ap.scaled_map;
  for (long i = 0; i < n; ++i) ap.output_map.col(i) *= std::exp(-0.25 * ap.nodes[std::size_t(i)] * ap.nodes[std::size_t(i)]);
  return ap;
}

}  // namespace hermite
