#pragma once
// Normalized probabilists' Hermite polynomials, orthonormal in L2(mu0).

#include <cmath>
#include <stdexcept>
#include <vector>

namespace hermite {

inline double hermite_eval(long nu, double x) {
  if (nu < 0) throw std::invalid_argument("hermite_eval: nu must be >= 0");
  if (!std::isfinite(x)) throw std::invalid_argument("hermite_eval: x must be finite");
  if (nu == 0) return 1.0;
  double h0 = 1.0, h1 = x;
  for (long k = 2; k <= nu; ++k) {
    double h2 = (x * h1 - std::sqrt(double(k - 1)) * h0) / std::sqrt(double(k));
    h0 = h1;
    h1 = h2;
  }
  return h1;
}

// Writes h_0(x), ..., h_{nu_max}(x) into out (resized).
inline void hermite_column(long nu_max, double x, std::vector<double>& out) {
  if (nu_max < 0) throw std::invalid_argument("hermite_column: nu_max must be >= 0");
  if (!std::isfinite(x)) throw std::invalid_argument("hermite_column: x must be finite");
  out.resize(std::size_t(nu_max) + 1);
  out[0] = 1.0;
  if (nu_max >= 1) out[1] = x;
  for (long k = 2; k <= nu_max; ++k)
    out[k] = (x * out[k - 1] - std::sqrt(double(k - 1)) * out[k - 2]) / std::sqrt(double(k));
}

inline std::vector<double> hermite_column(long nu_max, double x) {
  std::vector<double> out;
  hermite_column(nu_max, x, out);
  return out;
}

// h'_nu = sqrt(nu) h_{nu-1}
inline double hermite_derivative(long nu, double x) {
  return nu == 0 ? 0.0 : std::sqrt(double(nu)) * hermite_eval(nu - 1, x);
}

}  // namespace hermite
