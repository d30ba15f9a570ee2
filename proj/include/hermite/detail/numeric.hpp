#pragma once
// Small numerical helpers shared by the library.

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hermite::detail {

// Neumaier compensated summation in long double.
class CompensatedSum {
public:
  void add(long double x) {
    long double t = s_ + x;
    if (std::fabs(s_) >= std::fabs(x))
      c_ += (s_ - t) + x;
    else
      c_ += (x - t) + s_;
    s_ = t;
  }
  CompensatedSum& operator+=(long double x) {
    add(x);
    return *this;
  }
  long double value() const { return s_ + c_; }

private:
  long double s_ = 0.0L;
  long double c_ = 0.0L;
};

inline double gaussian_density(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double gaussian_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

// Gauss-Legendre rule on [-1, 1] by Newton iteration on P_q.
inline std::pair<std::vector<double>, std::vector<double>> gauss_legendre(int q) {
  if (q < 1) throw std::invalid_argument("gauss_legendre: q < 1");
  std::vector<double> x(q), w(q);
  for (int i = 0; i < q; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (q + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= q; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::fabs(dz) < 1e-16) break;
    }
    // recompute derivative at the converged root
    double p0 = 1.0, p1 = z;
    for (int k = 2; k <= q; ++k) {
      double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = q * (z * p1 - p0) / (z * z - 1.0);
    x[q - 1 - i] = z;
    w[q - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
  return {x, w};
}

// Gauss rule for the standard normal law (probabilists' Hermite), Golub-Welsch.
inline std::pair<std::vector<double>, std::vector<double>> gauss_hermite(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite: n < 1");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(double(k));
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(J);
  std::vector<double> x(n), w(n);
  // h_0..h_n at z; returns h_n, h_{n-1} and sum_{k<n} h_k^2
  auto eval = [n](double z, double& hn, double& hn1, double& christoffel) {
    double h0 = 1.0, h1 = z;
    christoffel = 1.0;
    for (int k = 2; k <= n; ++k) {
      christoffel += h1 * h1;
      double h2 = (z * h1 - std::sqrt(double(k - 1)) * h0) / std::sqrt(double(k));
      h0 = h1;
      h1 = h2;
    }
    hn = h1;
    hn1 = h0;
  };
  for (int i = 0; i < n; ++i) {
    // Newton polish on h_n (h_n' = sqrt(n) h_{n-1}), weight = 1 / sum_{k<n} h_k^2
    double z = es.eigenvalues()(i), hn, hn1, c;
    for (int it = 0; it < 3; ++it) {
      eval(z, hn, hn1, c);
      z -= hn / (std::sqrt(double(n)) * hn1);
    }
    eval(z, hn, hn1, c);
    x[i] = z;
    w[i] = 1.0 / c;
  }
  return {x, w};
}

}  // namespace hermite::detail
