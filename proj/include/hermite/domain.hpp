#pragma once
// Membership tests for the maximal domains X, X_UP and X_DOWN of sequences
// given by closed-form generators. Verdicts IN/OUT come only from comparison
// tests that apply to the generator form; everything else is UNDECIDED.

#include <cmath>
#include <stdexcept>
#include <string>

#include "polynomials.hpp"
#include "weight_scheme.hpp"

namespace hermite {

class SequenceSpec {
public:
  enum class Form { Constant, Power, Log };
  static SequenceSpec constant(double c) { return {Form::Constant, c, 0.0}; }
  // x_j = c j^p
  static SequenceSpec power(double c, double p) { return {Form::Power, c, p}; }
  // x_j = c ln(j + 1)
  static SequenceSpec logarithmic(double c) { return {Form::Log, c, 0.0}; }

  double operator()(long j) const {
    switch (form) {
      case Form::Constant: return c;
      case Form::Power: return c * std::pow(double(j), p);
      case Form::Log: return c * std::log(double(j) + 1.0);
    }
    return c;
  }
  bool bounded() const { return form == Form::Constant || c == 0.0 || (form == Form::Power && p <= 0.0); }

  Form form;
  double c;
  double p;
};

enum class Domain { X, X_UP, X_DOWN };
enum class Verdict { IN, OUT, UNDECIDED };

inline const char* to_string(Domain d) {
  switch (d) {
    case Domain::X: return "X";
    case Domain::X_UP: return "X_UP";
    case Domain::X_DOWN: return "X_DOWN";
  }
  return "?";
}
inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::IN: return "IN";
    case Verdict::OUT: return "OUT";
    case Verdict::UNDECIDED: return "UNDECIDED";
  }
  return "?";
}

struct DomainVerdict {
  Domain domain;
  Verdict verdict;
  double partial_sum;   // sum over j <= j_max of the defining series, nu <= nu_max
  double nu_tail_bound; // certified bound on the omitted nu-mass of those j
  std::string certificate;
};

namespace detail {

// Verdict on sum_j 2^{-r_j} x_j^2 (also X for EG with b_1 >= 1).
inline std::pair<Verdict, std::string> down_test(const WeightScheme& s, const SequenceSpec& x) {
  if (s.dimension() != 0) return {Verdict::IN, "finitely many non-trivial coordinates"};
  if (x.bounded()) return {Verdict::IN, "bounded sequence against summable 2^{-r_j}"};
  const auto& g = s.r_gen();
  if (g.form() == Generator::Form::Affine)
    return {Verdict::IN, "geometric 2^{-r_j} dominates polynomial/logarithmic growth of x_j^2"};
  if (g.form() == Generator::Form::Log) {
    const double sl = g.slope();
    if (x.form == SequenceSpec::Form::Log)
      return {Verdict::IN, "2^{-r_j} ~ j^{-" + fmt_num(sl) + "} with slope > 1 beats ln^2 j"};
    // x_j^2 ~ j^{2p}
    const double e = sl - 2.0 * x.p;
    if (e > 1.0) return {Verdict::IN, "terms ~ j^{-" + fmt_num(e) + "}, exponent > 1"};
    return {Verdict::OUT, "terms ~ j^{-" + fmt_num(e) + "}, exponent <= 1 (divergent p-series)"};
  }
  return {Verdict::UNDECIDED, "no comparison test for constant generator"};
}

}  // namespace detail

inline DomainVerdict domain_check(const WeightScheme& s, const SequenceSpec& x, Domain dom, long j_max,
                                  long nu_max = 64) {
  if (j_max < 1) throw std::invalid_argument("domain_check: j_max must be >= 1");
  DomainVerdict out{dom, Verdict::UNDECIDED, 0.0, 0.0, ""};

  // partial sums with certified nu-tails (Cramer)
  std::vector<double> col;
  for (long j = 1; j <= j_max; ++j) {
    if (s.trivial_coordinate(j)) break;
    const double xj = x(j);
    const double ex = std::exp(0.5 * xj * xj);
    if (dom == Domain::X_DOWN) {
      out.partial_sum += xj * xj / s.alpha(1, j);
      continue;
    }
    hermite_column(nu_max, xj, col);
    const long jj = dom == Domain::X ? j : 1;
    const double g = dom == Domain::X ? 1.0 : s.gamma(j);
    double acc = 0.0;
    for (long nu = 1; nu <= nu_max; ++nu) acc += s.inv_alpha(nu, jj) * col[nu] * col[nu];
    out.partial_sum += g * acc;
    out.nu_tail_bound += g * ex * s.nu_tail(jj, nu_max);
  }

  const bool finite_dim = s.dimension() != 0;
  const bool eg_analytic = s.kind() == SchemeKind::EG && s.b(1) >= 1.0;

  if (dom == Domain::X_DOWN) {
    auto [v, why] = detail::down_test(s, x);
    out.verdict = v;
    out.certificate = "sum alpha_{1,j}^{-1} x_j^2: " + why;
    return out;
  }
  if (finite_dim) {
    out.verdict = Verdict::IN;
    out.certificate = "finitely many non-trivial coordinates";
    return out;
  }
  if (x.bounded()) {
    // Cramer: h_nu^2(x_j) <= e^{sup x_j^2 / 2}; sums of gamma_j and alpha^{-1} are finite
    out.verdict = Verdict::IN;
    out.certificate = "bounded sequence: Cramer bound times finite weight sums";
    return out;
  }
  if (dom == Domain::X) {
    auto [dv, dwhy] = detail::down_test(s, x);
    if (dv == Verdict::OUT) {
      out.verdict = Verdict::OUT;
      out.certificate = "X is contained in X_DOWN, which fails: " + dwhy;
      return out;
    }
    if (eg_analytic) {
      out.verdict = dv;
      out.certificate = "EG with b_1 >= 1: X = {sum 2^{-r_j} x_j^2 < inf}; " + dwhy;
      return out;
    }
    // Cramer sufficient test: sum_j nu_sum(j) e^{x_j^2/2} with nu_sum(j) <= C 2^{-r_j}
    const auto& g = s.r_gen();
    if (g.form() == Generator::Form::Affine && x.form == SequenceSpec::Form::Power) {
      const double sl = g.slope() * std::numbers::ln2;
      if (2.0 * x.p < 1.0 || (2.0 * x.p == 1.0 && 0.5 * x.c * x.c < sl)) {
        out.verdict = Verdict::IN;
        out.certificate = "Cramer: e^{x_j^2/2} grows slower than 2^{r_j}";
        return out;
      }
    }
    if (g.form() == Generator::Form::Affine && x.form == SequenceSpec::Form::Log) {
      out.verdict = Verdict::IN;
      out.certificate = "Cramer: e^{c^2 ln^2(j+1)/2} is subexponential against geometric 2^{-r_j}";
      return out;
    }
    out.certificate = "no comparison test applies; see partial sums";
    return out;
  }
  // X_UP: terms >= gamma_j alpha_{nu,1}^{-1} h_nu(x_j)^2 for every fixed nu
  const auto& g = s.r_gen();
  if (g.form() == Generator::Form::Log && x.form == SequenceSpec::Form::Power && x.p > 0.0) {
    // gamma_j ~ j^{-s}, h_nu(x_j)^2 ~ x_j^{2nu}/nu! ~ j^{2p nu}
    const double sl = g.slope();
    long nu = long(std::ceil((sl - 1.0) / (2.0 * x.p)));
    nu = std::max<long>(nu, 1);
    out.verdict = Verdict::OUT;
    out.certificate = "gamma_j alpha_{" + std::to_string(nu) + ",1}^{-1} h_" + std::to_string(nu) +
                      "(x_j)^2 ~ j^{" + detail::fmt_num(2.0 * x.p * nu - sl) + "}, exponent >= -1 (divergent)";
    return out;
  }
  if (g.form() == Generator::Form::Affine && x.form == SequenceSpec::Form::Power && 2.0 * x.p < 1.0) {
    out.verdict = Verdict::IN;
    out.certificate = "Cramer: gamma_j e^{x_j^2/2} summable (geometric against subexponential)";
    return out;
  }
  if (g.form() == Generator::Form::Affine && x.form == SequenceSpec::Form::Log) {
    out.verdict = Verdict::IN;
    out.certificate = "Cramer: gamma_j e^{x_j^2/2} summable (geometric against subexponential)";
    return out;
  }
  out.certificate = "no comparison test applies; see partial sums";
  return out;
}

}  // namespace hermite
