#include <gtest/gtest.h>

#include <cmath>
#include <hermite/decay.hpp>
#include <hermite/quad1d.hpp>
#include <random>
#include <sstream>

#include "oracles.hpp"

using namespace hermite;

namespace {

double pg_inv_alpha(double r, long nu) { return std::pow(double(nu + 1), -r); }
// sum_{nu>N} (nu+1)^{-r} <= (N+1)^{1-r}/(r-1)
double pg_tail(double r, long N) { return std::pow(double(N + 1), 1.0 - r) / (r - 1.0); }

Rule1D random_rule(std::mt19937_64& gen, int n) {
  std::normal_distribution<double> nd(0.0, 1.3);
  std::uniform_real_distribution<double> ud(0.02, 0.5);
  Rule1D r;
  for (int i = 0; i < n; ++i) {
    r.nodes.push_back(nd(gen));
    r.weights.push_back(ud(gen));
  }
  return r;
}

}  // namespace

TEST(BaseRule, SingleMidpoint) {
  auto r = base_rule(1, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r.nodes[0], 0.0);
  EXPECT_DOUBLE_EQ(r.weights[0], 1.0);
}

TEST(BaseRule, WeightsSumToOne) {
  for (int r = 1; r <= 9; ++r)
    for (long m = 1; m <= 40; ++m) EXPECT_NEAR(base_rule(m, r).weight_sum(), 1.0, 1e-14) << m << " " << r;
}

TEST(BaseRule, ExactForPanelPolynomials) {
  for (int r = 1; r <= 9; ++r) {
    for (long m : {1L, 3L, 7L}) {
      auto rule = base_rule(m, r);
      for (int k = 0; k <= r - 1; ++k) {
        const double exact = (std::pow(0.5, k + 1) - std::pow(-0.5, k + 1)) / (k + 1);
        EXPECT_NEAR(rule.apply([k](double x) { return std::pow(x, k); }), exact, 1e-14) << r << " " << m << " " << k;
      }
      for (double w : rule.weights) EXPECT_GT(w, 0.0);
      for (double x : rule.nodes) {
        EXPECT_GE(x, -0.5);
        EXPECT_LE(x, 0.5);
      }
    }
  }
}

TEST(BaseRule, QuadraticErrorDecaysLikeMSquared) {
  std::vector<std::pair<double, double>> pts;
  for (long m = 2; m <= 256; m *= 2) {
    const double e = std::fabs(1.0 / 12.0 - base_rule(m, 2).apply([](double x) { return x * x; }));
    pts.push_back({double(m), e});
  }
  EXPECT_NEAR(decay_estimate(pts).rate, 2.0, 0.05);
}

TEST(BaseRule, RejectsBadSizes) {
  EXPECT_THROW(base_rule(0, 2), std::invalid_argument);
  EXPECT_THROW(base_rule(3, 0), std::invalid_argument);
}

TEST(ShiftedRule, SingleNodeAtOrigin) {
  auto r = shifted_rule(1, {1}, 1);
  ASSERT_EQ(r.size(), 1u);
  EXPECT_DOUBLE_EQ(r.nodes[0], 0.0);
  EXPECT_NEAR(r.weights[0], 1.0 / std::sqrt(2.0 * std::numbers::pi), 1e-16);
}

TEST(ShiftedRule, MassOfTruncatedGaussian) {
  auto r = shifted_rule(5, std::vector<long>(9, 64), 4);
  const double exact = std::erf(4.5 / std::sqrt(2.0));
  EXPECT_NEAR(r.weight_sum(), exact, 1e-6);
  EXPECT_NEAR(exact, 0.999993, 1e-6);
  for (double w : r.weights) EXPECT_GT(w, 0.0);
}

TEST(ShiftedRule, LengthMismatch) {
  EXPECT_THROW(shifted_rule(2, {1, 1}, 1), std::invalid_argument);
  EXPECT_THROW(shifted_rule(0, {}, 1), std::invalid_argument);
}

TEST(Schedule, SmallestCase) {
  auto s = schedule(2, 1, 0.2);
  EXPECT_EQ(s.L, 2);
  EXPECT_EQ(s.m_vec, (std::vector<long>{2, 2, 2}));
}

TEST(Schedule, NonIncreasingInShift) {
  for (long n : {2L, 17L, 100L, 4096L})
    for (int r : {1, 2, 3}) {
      auto s = schedule(n, r, 0.2);
      for (int l = 1; l < s.L; ++l) {
        EXPECT_LE(s.m_vec[std::size_t(s.L - 1 + l)], s.m_vec[std::size_t(s.L - 2 + l)]);
        EXPECT_EQ(s.m_vec[std::size_t(s.L - 1 + l)], s.m_vec[std::size_t(s.L - 1 - l)]);
      }
      EXPECT_EQ(s.m_vec[std::size_t(s.L - 1)], n);
    }
}

TEST(Schedule, RejectsDelta) {
  EXPECT_THROW(schedule(8, 2, 0.0), std::invalid_argument);
  EXPECT_THROW(schedule(8, 2, 0.25), std::invalid_argument);
  EXPECT_THROW(schedule(1, 2, 0.2), std::invalid_argument);
}

TEST(Schedule, NodeCountLinearInN) {
  for (int r : {1, 2, 3}) {
    double lo = 1e300, hi = 0.0;
    for (long n = 2; n <= 4096; n *= 2) {
      const double q = double(build_An(n, r, 0.2).size()) / double(n);
      lo = std::min(lo, q);
      hi = std::max(hi, q);
    }
    EXPECT_LT(hi, 20.0) << r;
    EXPECT_LE(hi / lo, 4.0) << r;
  }
}

TEST(BuildAn, ComposesScheduleAndShift) {
  auto s = schedule(2, 2, 0.2);
  auto a = build_An(2, 2, 0.2);
  auto b = shifted_rule(s.L, s.m_vec, 2);
  EXPECT_EQ(a.nodes, b.nodes);
  EXPECT_EQ(a.weights, b.weights);
  ASSERT_TRUE(a.meta.has_value());
  EXPECT_EQ(a.meta->L, s.L);
  EXPECT_DOUBLE_EQ(a.meta->delta, 0.2);
}

TEST(BuildAn, NodeCountsMatchSchedule) {
  for (long n : {2L, 8L, 33L, 256L}) {
    for (int r : {1, 2}) EXPECT_EQ(long(build_An(n, r).size()), schedule(n, r, 0.2).total());
    // two Gauss points per panel round each m_l up to even
    auto s = schedule(n, 3, 0.2);
    EXPECT_GE(long(build_An(n, 3).size()), s.total());
    EXPECT_LE(long(build_An(n, 3).size()), s.total() + long(s.m_vec.size()));
  }
}

TEST(BuildAn, NodesInsideShiftedIntervals) {
  auto a = build_An(64, 2);
  for (double x : a.nodes) EXPECT_LE(std::fabs(x), double(a.meta->L) - 0.5);
}

TEST(WorstCaseInt, ZeroRule) {
  auto s = WeightScheme::univariate_pg(2);
  auto e = worst_case_error_int(Rule1D{}, s);
  EXPECT_EQ(e.err, 1.0);
  EXPECT_EQ(e.cost, 0);
}

TEST(WorstCaseInt, SingleNodeAtZero) {
  auto s = WeightScheme::univariate_pg(2);
  Rule1D r{{0.0}, {1.0}, {}};
  const double k00 = 1.088793045151801;
  for (auto m : {ErrorMethod::Spectral, ErrorMethod::Gram}) {
    auto e = worst_case_error_int(r, s, 1, 1e-14, m);
    EXPECT_NEAR(e.err * e.err, k00 - 1.0, 1e-12);
  }
}

TEST(WorstCaseInt, TruncatedSpectralOracle) {
  std::mt19937_64 gen(11);
  auto s = WeightScheme::univariate_pg(2);
  for (int t = 0; t < 5; ++t) {
    auto rule = random_rule(gen, 5);
    auto e = worst_case_error_int(rule, s, 1, 1e-16);
    auto o = oracle::truncated_spectral_int(
        rule, [](long nu) { return pg_inv_alpha(2, nu); }, 200, 2'000'000, [](long N) { return pg_tail(2, N); });
    // omitted degrees only add non-negative terms
    const double lo = std::sqrt(o.err2), hi = std::sqrt(o.err2 + o.omitted);
    EXPECT_GE(e.err, lo - 1e-6 - e.tail_bound);
    EXPECT_LE(e.err, hi + 1e-6 + e.tail_bound);
  }
}

TEST(WorstCaseInt, FiniteDimensionalSchemeExact) {
  std::vector<double> row{1.0};
  for (int nu = 1; nu <= 12; ++nu) row.push_back(std::pow(nu + 1.0, 1.5));
  auto s = WeightScheme::custom({row});
  std::mt19937_64 gen(5);
  for (int t = 0; t < 4; ++t) {
    auto rule = random_rule(gen, 7);
    auto o = oracle::truncated_spectral_int(
        rule, [&](long nu) { return nu < long(row.size()) ? 1.0 / row[std::size_t(nu)] : 0.0; }, 12, 12,
        [](long) { return 0.0; });
    for (auto m : {ErrorMethod::Auto, ErrorMethod::Gram, ErrorMethod::Series}) {
      auto e = worst_case_error_int(rule, s, 1, 1e-14, m);
      EXPECT_NEAR(e.err, std::sqrt(o.err2), 1e-10);
    }
  }
}

TEST(WorstCaseInt, RoutesAgree) {
  auto s = WeightScheme::univariate_pg(2);
  for (long n : {2L, 8L, 16L}) {
    auto rule = build_An(n, 2);
    auto a = worst_case_error_int(rule, s, 1, 1e-20, ErrorMethod::Spectral);
    auto b = worst_case_error_int(rule, s, 1, 1e-13, ErrorMethod::Gram);
    EXPECT_NEAR(a.err, b.err, 1e-7 + b.tail_bound);
  }
  auto eg = WeightScheme::univariate_eg(1.0, 0.5);
  auto rule = build_An(8, 2);
  auto a = worst_case_error_int(rule, eg, 1, 1e-16, ErrorMethod::Series);
  auto b = worst_case_error_int(rule, eg, 1, 1e-12, ErrorMethod::Gram);
  EXPECT_NEAR(a.err, b.err, 1e-6);
}

TEST(WorstCaseInt, PrototypeValues) {
  auto s2 = WeightScheme::univariate_pg(2);
  EXPECT_NEAR(worst_case_error_int(build_An(8, 2), s2).err, 6.787202e-4, 2e-9);
  EXPECT_NEAR(worst_case_error_int(build_An(128, 2), s2).err, 2.762582e-6, 2e-11);
  auto s1 = WeightScheme::univariate_pg(1);
  EXPECT_NEAR(worst_case_error_int(build_An(8, 1), s1).err, 3.906018e-2, 2e-8);
}

TEST(WorstCaseInt, RateReproduction) {
  for (int r : {1, 2}) {
    auto s = WeightScheme::univariate_pg(r);
    std::vector<std::pair<double, double>> pts;
    double prev = 1e300;
    for (long n = 8; n <= 1024; n *= 2) {
      auto e = worst_case_error_int(build_An(n, r), s);
      EXPECT_LE(e.err, prev + e.tail_bound);
      prev = e.err;
      pts.push_back({double(n), e.err});
    }
    const double rate = decay_estimate(pts).rate;
    EXPECT_GE(rate, r - 0.3) << r;
    EXPECT_LE(rate, r + 0.3) << r;
    if (r == 2) {
      EXPECT_NEAR(pts[pts.size() - 2].second / pts.back().second, 4.0, 0.5);
    }
  }
}

TEST(WorstCaseInt, SimultaneousOptimality) {
  auto s1 = WeightScheme::univariate_pg(1);
  std::vector<std::pair<double, double>> pts;
  for (long n = 8; n <= 512; n *= 2) pts.push_back({double(n), worst_case_error_int(build_An(n, 2), s1).err});
  EXPECT_GE(decay_estimate(pts).rate, 0.7);
}

TEST(WorstCaseInt, Deterministic) {
  auto s = WeightScheme::univariate_pg(2);
  auto rule = build_An(64, 2);
  auto a = worst_case_error_int(rule, s);
  auto b = worst_case_error_int(rule, s);
  EXPECT_EQ(a.err, b.err);
  EXPECT_EQ(a.tail_bound, b.tail_bound);
}

TEST(WorstCaseInt, RejectsBadInput) {
  auto s = WeightScheme::univariate_pg(2);
  EXPECT_THROW(worst_case_error_int(build_An(4, 2), s, 1, 0.0), std::invalid_argument);
  Rule1D bad{{std::nan("")}, {1.0}, {}};
  EXPECT_THROW(worst_case_error_int(bad, s), std::invalid_argument);
}

TEST(RuleIo, RoundTrip) {
  auto rule = build_An(16, 3, 0.15);
  std::stringstream ss;
  write_rule(ss, rule, "pg1 r=3");
  std::string id;
  auto back = read_rule(ss, &id);
  EXPECT_EQ(id, "pg1 r=3");
  EXPECT_EQ(back.nodes, rule.nodes);
  EXPECT_EQ(back.weights, rule.weights);
  ASSERT_TRUE(back.meta.has_value());
  EXPECT_EQ(back.meta->m_vec, rule.meta->m_vec);
  EXPECT_EQ(back.meta->L, rule.meta->L);
  EXPECT_DOUBLE_EQ(back.meta->delta, 0.15);
  std::stringstream bad("not a rule\n");
  EXPECT_THROW(read_rule(bad), std::runtime_error);
}
