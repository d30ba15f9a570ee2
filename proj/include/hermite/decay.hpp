#pragma once
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

namespace hermite {

struct DecayFit {
  double rate = 0.0;       // slope of ln(1/z) against ln n
  double intercept = 0.0;  // ln(1/z) at n = 1 on the fitted line
  double residual_rms = 0.0;
  double max_abs_residual = 0.0;
  std::size_t points = 0;
};

// Least-squares slope of ln(1/z_n) against ln n.
inline DecayFit decay_estimate(const std::vector<std::pair<double, double>>& samples) {
  if (samples.size() < 4) throw std::invalid_argument("decay_estimate: need at least 4 samples");
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!(samples[i].first > 0.0) || !(samples[i].second > 0.0))
      throw std::invalid_argument("decay_estimate: n and z_n must be positive");
    if (i && !(samples[i].first > samples[i - 1].first))
      throw std::invalid_argument("decay_estimate: n must be strictly increasing");
  }
  const double m = double(samples.size());
  double sx = 0, sy = 0;
  for (auto [n, z] : samples) {
    sx += std::log(n);
    sy += -std::log(z);
  }
  const double mx = sx / m, my = sy / m;
  double sxx = 0, sxy = 0;
  for (auto [n, z] : samples) {
    const double dx = std::log(n) - mx;
    sxx += dx * dx;
    sxy += dx * (-std::log(z) - my);
  }
  DecayFit f;
  f.rate = sxy / sxx;
  f.intercept = my - f.rate * mx;
  f.points = samples.size();
  double ss = 0;
  for (auto [n, z] : samples) {
    const double res = -std::log(z) - (f.intercept + f.rate * std::log(n));
    ss += res * res;
    f.max_abs_residual = std::max(f.max_abs_residual, std::fabs(res));
  }
  f.residual_rms = std::sqrt(ss / m);
  return f;
}

}  // namespace hermite
