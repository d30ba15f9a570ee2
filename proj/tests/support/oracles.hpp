#pragma once
// Reference evaluators used by the unit tests and the acceptance runner.
// They avoid the library's fast paths: plain recurrences, dense matrices.

#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <functional>
#include <vector>

#include <hermite/polynomials.hpp>
#include <hermite/quad1d.hpp>

namespace oracle {

// h_nu from the monomial expansion of He_nu (He_{n+1} = x He_n - n He_{n-1}),
// scaled by 1/sqrt(nu!).
inline long double monomial_hermite(int nu, long double x) {
  std::vector<std::vector<long double>> c(nu + 1);
  c[0] = {1.0L};
  if (nu >= 1) c[1] = {0.0L, 1.0L};
  for (int n = 1; n < nu; ++n) {
    c[n + 1].assign(n + 2, 0.0L);
    for (int k = 0; k <= n; ++k) c[n + 1][k + 1] += c[n][k];
    for (int k = 0; k < int(c[n - 1].size()); ++k) c[n + 1][k] -= n * c[n - 1][k];
  }
  long double v = 0.0L, p = 1.0L;
  for (long double ck : c[nu]) {
    v += ck * p;
    p *= x;
  }
  long double fact = 1.0L;
  for (int k = 2; k <= nu; ++k) fact *= k;
  return v / std::sqrt(fact);
}

struct Truncated {
  double err2 = 0.0;   // sup of |I f - A f|^2 over the unit ball of span{e_0..e_N}
  double omitted = 0.0;  // bound on the contribution of nu > N
};

// Integration error functional on e_nu = alpha_nu^{-1/2} h_nu: l_0 = 1 - sum w,
// l_nu = -alpha_nu^{-1/2} sum_i w_i h_nu(x_i). The worst case on the truncated
// ball is the top eigenvalue of l l^T, computed densely for nu <= n_dense; the
// form is rank one, so further degrees up to n_total add l_nu^2 exactly.
// tail_mass(N) must bound sum_{nu>N} alpha_nu^{-1}.
inline Truncated truncated_spectral_int(const hermite::Rule1D& rule, const std::function<double(long)>& inv_alpha,
                                        long n_dense, long n_total,
                                        const std::function<double(long)>& tail_mass) {
  const std::size_t n = rule.size();
  std::vector<std::vector<double>> H(n);
  for (std::size_t i = 0; i < n; ++i) H[i] = hermite::hermite_column(n_total, rule.nodes[i]);
  auto ell = [&](long nu) {
    long double q = 0.0L;
    for (std::size_t i = 0; i < n; ++i) q += (long double)(rule.weights[i]) * H[i][std::size_t(nu)];
    if (nu == 0) return double(1.0L - q);
    return -std::sqrt(inv_alpha(nu)) * double(q);
  };
  Eigen::VectorXd l(n_dense + 1);
  for (long nu = 0; nu <= n_dense; ++nu) l(nu) = ell(nu);
  Eigen::MatrixXd M = l * l.transpose();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(M, Eigen::EigenvaluesOnly);
  long double e2 = es.eigenvalues().maxCoeff();
  for (long nu = n_dense + 1; nu <= n_total; ++nu) {
    const double v = ell(nu);
    e2 += (long double)(v) * v;
  }
  double W = 0.0;
  for (std::size_t i = 0; i < n; ++i) W += std::fabs(rule.weights[i]) * std::exp(0.25 * rule.nodes[i] * rule.nodes[i]);
  return {double(e2), W * W * tail_mass(n_total)};
}


// Squared integration error of sum_i w_i f(x_i) on a two-coordinate space with
// finite weight tables inv_alpha[j][nu] (j = 0, 1): expands both kernels fully,
//   err^2 = sum_{nu1,nu2} a1 a2 (delta_{nu=0} - sum_i w_i h_nu1(x_i1) h_nu2(x_i2))^2.
inline double bivariate_err2(const std::vector<std::array<double, 2>>& x, const std::vector<double>& w,
                             const std::vector<std::vector<double>>& inv_alpha) {
  const std::size_t n1 = inv_alpha[0].size(), n2 = inv_alpha[1].size();
  std::vector<std::vector<long double>> h1(x.size()), h2(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    for (std::size_t v = 0; v < n1; ++v) h1[i].push_back(monomial_hermite(int(v), x[i][0]));
    for (std::size_t v = 0; v < n2; ++v) h2[i].push_back(monomial_hermite(int(v), x[i][1]));
  }
  long double e2 = 0.0L;
  for (std::size_t a = 0; a < n1; ++a)
    for (std::size_t b = 0; b < n2; ++b) {
      long double q = (a == 0 && b == 0) ? 1.0L : 0.0L;
      for (std::size_t i = 0; i < x.size(); ++i) q -= w[i] * h1[i][a] * h2[i][b];
      e2 += (long double)(inv_alpha[0][a]) * inv_alpha[1][b] * q * q;
    }
  return double(e2);
}

}  // namespace oracle
