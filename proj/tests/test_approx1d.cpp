#include <gtest/gtest.h>

#include <cmath>
#include <hermite/approx1d.hpp>
#include <hermite/decay.hpp>
#include <hermite/detail/numeric.hpp>
#include <hermite/weights.hpp>
#include <sstream>

using namespace hermite;

namespace {

// Discrete projection onto span{h_0..h_{N-1}} through an M-point Gauss-Hermite rule:
// exact on polynomials of degree <= 2M - N.
Approx1D gauss_projection(long N, int M) {
  auto [x, w] = detail::gauss_hermite(M);
  Approx1D ap;
  ap.basis_dim = N;
  ap.nodes = x;
  ap.node_weights = w;
  ap.scaled_map.resize(N, M);
  for (int i = 0; i < M; ++i) {
    auto h = hermite_column(N - 1, x[i]);
    for (long k = 0; k < N; ++k) ap.scaled_map(k, i) = w[i] * h[std::size_t(k)] * std::exp(0.25 * x[i] * x[i]);
  }
  ap.output_map = ap.scaled_map;
  for (int i = 0; i < M; ++i) ap.output_map.col(i) *= std::exp(-0.25 * x[i] * x[i]);
  return ap;
}

}  // namespace

TEST(Sampler, CdfDerivativeIsSquaredDensity) {
  for (long nu : {0L, 1L, 4L, 11L})
    for (double x : {-2.1, 0.3, 1.7}) {
      const double h = 1e-5;
      const double d = (detail::hermite_square_cdf(nu, x + h) - detail::hermite_square_cdf(nu, x - h)) / (2 * h);
      const double hv = hermite_eval(nu, x);
      EXPECT_NEAR(d, hv * hv * detail::gaussian_density(x), 1e-8);
    }
  EXPECT_NEAR(detail::hermite_square_cdf(9, 40.0), 1.0, 1e-14);
  EXPECT_NEAR(detail::hermite_square_cdf(9, -40.0), 0.0, 1e-14);
}

TEST(Sampler, LargeDrawGivesNearIdentityGram) {
  LsOptions opt;
  opt.pool_factor = 1;
  opt.stratified = false;
  auto ap = build_ls_approx(20000, 8, 3, opt);
  EXPECT_LT(ap.condition, 1.5);
}

TEST(ScaledHermite, MatchesPlainColumn) {
  for (double x : {-3.0, 0.5, 6.0}) {
    std::vector<double> hs;
    detail::scaled_hermite_column(40, x, hs);
    auto h = hermite_column(40, x);
    for (int k = 0; k <= 40; ++k) EXPECT_NEAR(hs[k], h[k] * std::exp(-0.25 * x * x), 1e-12 * (1 + std::fabs(hs[k])));
  }
  std::vector<double> hs;
  detail::scaled_hermite_column(300, 45.0, hs);
  for (double v : hs) EXPECT_TRUE(std::isfinite(v));
}

TEST(BuildLs, ReproducesConstants) {
  auto ap = build_ls_approx(64, 16, 1);
  auto c = ap.apply([](double) { return 1.0; });
  EXPECT_NEAR(c(0), 1.0, 1e-12);
  for (long k = 1; k < 16; ++k) EXPECT_NEAR(c(k), 0.0, 1e-12);
}

TEST(BuildLs, ReproducesSpan) {
  auto ap = build_ls_approx(96, 24, 2);
  for (long nu = 0; nu < 24; ++nu) {
    auto c = ap.apply([nu](double x) { return hermite_eval(nu, x); });
    for (long k = 0; k < 24; ++k) EXPECT_NEAR(c(k), k == nu ? 1.0 : 0.0, 1e-8) << nu << " " << k;
  }
}

TEST(BuildLs, PreconditionsAndConditioning) {
  EXPECT_THROW(build_ls_approx(10, 8, 0), std::invalid_argument);
  EXPECT_THROW(build_ls_approx(10, 0, 0), std::invalid_argument);
  LsOptions opt;
  opt.max_cond = 1.0000001;
  EXPECT_THROW(build_ls_approx(32, 8, 0, opt), IllConditioned);
}

TEST(BuildLs, DeterministicGivenSeed) {
  auto a = build_ls_approx(64, 16, 99);
  auto b = build_ls_approx(64, 16, 99);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.node_weights, b.node_weights);
  EXPECT_TRUE((a.output_map.array() == b.output_map.array()).all());
  auto c = build_ls_approx(64, 16, 100);
  EXPECT_NE(a.nodes, c.nodes);
}

TEST(WorstCaseL2, ZeroAlgorithm) {
  Approx1D ap;
  ap.basis_dim = 1;
  ap.nodes = {0.3};
  ap.node_weights = {1.0};
  ap.scaled_map = Eigen::MatrixXd::Zero(1, 1);
  ap.output_map = ap.scaled_map;
  auto s = WeightScheme::univariate_pg(2);
  auto e = worst_case_error_l2(ap, s);
  EXPECT_NEAR(e.err, 1.0, 1e-15);
}

TEST(WorstCaseL2, IdealProjection) {
  auto s = WeightScheme::univariate_pg(2);
  const long N = 8, Nt = 64;
  auto ap = gauss_projection(N, 40);
  auto e = worst_case_error_l2(ap, s, 1, Nt, 1e300);
  EXPECT_NEAR(e.err, std::sqrt(s.inv_alpha(N, 1)), 1e-10);
}

TEST(WorstCaseL2, BelowBetaBound) {
  auto s = WeightScheme::univariate_pg(2);
  auto ap = build_ls_approx(64, 16, 7);
  auto e = worst_case_error_l2(ap, s);
  EXPECT_LT(e.err, 1.5 * beta_sequence(s, 1, 8));
}

TEST(WorstCaseL2, RateAndLowerBound) {
  auto s = WeightScheme::univariate_pg(2);
  std::vector<std::pair<double, double>> pts;
  for (long n = 32; n <= 512; n *= 2) {
    auto ap = build_ls_approx(n, n / 4, 42);
    auto e = worst_case_error_l2(ap, s, 1, -1, 1e300);
    EXPECT_GE(e.err, spectral_lower_bound(s, 1, long(ap.size())) - 1e-12);
    pts.push_back({double(n), e.err});
  }
  const double rate = decay_estimate(pts).rate;
  EXPECT_GE(rate, 0.7);
  EXPECT_LE(rate, 1.3);
}

TEST(WorstCaseL2, TruncationIsMonotone) {
  auto s = WeightScheme::univariate_pg(2);
  auto ap = build_ls_approx(64, 16, 5);
  auto a = worst_case_error_l2(ap, s, 1, 64, 1e300);
  auto b = worst_case_error_l2(ap, s, 1, 256, 1e300);
  EXPECT_LE(a.err, b.err + 1e-14);
  EXPECT_LE(b.err, a.err + a.tail_bound);
  EXPECT_THROW(worst_case_error_l2(ap, s, 1, 8), std::invalid_argument);
}

TEST(SpectralLowerBound, Examples) {
  EXPECT_DOUBLE_EQ(spectral_lower_bound(WeightScheme::univariate_pg(2), 1, 3), 0.25);
  EXPECT_DOUBLE_EQ(spectral_lower_bound(WeightScheme::univariate_pg(2), 1, 0), 1.0);
  EXPECT_DOUBLE_EQ(spectral_lower_bound(WeightScheme::univariate_eg(1, 1), 1, 2), 0.5);
  EXPECT_THROW(spectral_lower_bound(WeightScheme::univariate_pg(2), 1, -1), std::invalid_argument);
}

TEST(ApproxIo, RoundTrip) {
  auto ap = build_ls_approx(40, 10, 3);
  std::stringstream ss;
  write_approx(ss, ap, "pg1 r=2");
  std::string id;
  auto back = read_approx(ss, &id);
  EXPECT_EQ(id, "pg1 r=2");
  EXPECT_EQ(back.nodes, ap.nodes);
  EXPECT_EQ(back.seed, ap.seed);
  EXPECT_TRUE((back.scaled_map.array() == ap.scaled_map.array()).all());
  auto s = WeightScheme::univariate_pg(2);
  EXPECT_EQ(worst_case_error_l2(back, s, 1, -1, 1e300).err, worst_case_error_l2(ap, s, 1, -1, 1e300).err);
}
