#pragma once
// Multivariate decomposition method on H(K): planning, assembly into a flat
// rule over anchored points, cost accounting, error bounds and exact errors.

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <istream>
#include <limits>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchored_point.hpp"
#include "approx1d.hpp"
#include "detail/numeric.hpp"
#include "kernel.hpp"
#include "smolyak.hpp"
#include "weight_scheme.hpp"
#include "weights.hpp"

namespace hermite {

// ---------------------------------------------------------------- cost model

class CostModel {
public:
  enum class Form { Affine, Table };

  static CostModel affine(double c0 = 1.0, double c1 = 1.0) {
    if (!(c0 >= 1.0) || !(c1 >= 0.0)) throw std::invalid_argument("CostModel: affine needs c0 >= 1, c1 >= 0");
    CostModel m;
    m.form_ = Form::Affine;
    m.c0_ = c0;
    m.c1_ = c1;
    return m;
  }
  static CostModel table(std::vector<double> values) {
    if (values.empty() || !(values[0] >= 1.0)) throw std::invalid_argument("CostModel: table needs $(0) >= 1");
    for (std::size_t k = 1; k < values.size(); ++k)
      if (!(values[k] >= values[k - 1])) throw std::invalid_argument("CostModel: table must be non-decreasing");
    CostModel m;
    m.form_ = Form::Table;
    m.table_ = std::move(values);
    return m;
  }
  // "affine:c0,c1" or "table:v0,v1,..."
  static CostModel parse(std::string_view text) {
    const auto colon = text.find(':');
    const std::string head(text.substr(0, colon));
    const auto args = colon == std::string_view::npos ? std::vector<double>{} : detail::parse_args(text.substr(colon + 1));
    if (head == "affine") {
      if (args.size() != 2) throw std::invalid_argument("CostModel: affine takes c0,c1");
      return affine(args[0], args[1]);
    }
    if (head == "table") return table(args);
    throw std::invalid_argument("CostModel: unknown form '" + head + "'");
  }

  Form form() const { return form_; }
  double operator()(long n) const {
    if (n < 0) throw std::invalid_argument("CostModel: n must be >= 0");
    if (form_ == Form::Affine) return c0_ + c1_ * double(n);
    if (std::size_t(n) >= table_.size()) throw std::out_of_range("CostModel: table too short for n = " + std::to_string(n));
    return table_[std::size_t(n)];
  }
  long domain_max() const { return form_ == Form::Table ? long(table_.size()) - 1 : std::numeric_limits<long>::max(); }

  // c_lo n <= $(n) <= exp(c_hi n) for 1 <= n <= n_max (within the table range).
  bool bracket_check(double c_lo, double c_hi, long n_max = 1000) const {
    const long top = std::min(n_max, domain_max());
    for (long n = 1; n <= top; ++n) {
      const double v = (*this)(n);
      if (v < c_lo * double(n) || std::log(v) > c_hi * double(n)) return false;
    }
    return true;
  }

  std::string to_string() const {
    std::string s = form_ == Form::Affine ? "affine:" + detail::fmt_num(c0_) + "," + detail::fmt_num(c1_) : "table:";
    if (form_ == Form::Table)
      for (std::size_t k = 0; k < table_.size(); ++k) s += (k ? "," : "") + detail::fmt_num(table_[k]);
    return s;
  }

private:
  Form form_ = Form::Affine;
  double c0_ = 1.0, c1_ = 1.0;
  std::vector<double> table_;
};

// ------------------------------------------------------ anchored decomposition

// The 2^{|u|} signed points whose values sum to f_u(x).
inline std::vector<std::pair<AnchoredPoint, int>> anchored_component_points(const std::vector<long>& u,
                                                                           const AnchoredPoint& x) {
  if (!std::is_sorted(u.begin(), u.end())) throw std::invalid_argument("anchored_component_points: u must be sorted");
  if (u.size() > 30) throw std::invalid_argument("anchored_component_points: |u| too large");
  if (!x.active_only_on(u)) throw std::invalid_argument("anchored_component_points: x is active outside u");
  std::vector<std::pair<AnchoredPoint, int>> out;
  const std::size_t d = u.size();
  for (unsigned long v = 0; v < (1ul << d); ++v) {
    std::vector<AnchoredPoint::Entry> e;
    int missing = 0;
    for (std::size_t m = 0; m < d; ++m) {
      if ((v >> m) & 1ul) e.push_back({u[m], x[u[m]]});
      else ++missing;
    }
    out.push_back({AnchoredPoint(x.anchor(), std::move(e)), (missing % 2) ? -1 : 1});
  }
  return out;
}

// ---------------------------------------------------------------- planning

struct ActiveSet {
  std::vector<long> u;
  double p = 0.0;
  long n = 0;
};

struct MdmPlan {
  std::string scheme_id;
  double eps = 0.0, kappa = 0.0, delta = 0.0, a = 0.0;
  double C0 = 0.0, C1 = 0.0;
  double L_const = 0.0, L_tail = 0.0;
  std::vector<ActiveSet> active;
  int d_eps = 0;
};

namespace detail {

// Certified sum_{j>J} gamma_j^c: closed Hurwitz tail for the log generator with
// integer shift, otherwise the generic bound.
inline std::pair<double, double> gamma_power_tail(const WeightScheme& s, long J, double c) {
  const Generator& g = s.r_gen();
  if (s.dimension() == 0 && g.form() == Generator::Form::Log && g.shift() == std::floor(g.shift()) &&
      c * g.slope() > 1.0) {
    const double p = c * g.slope();
    const long q = long(g.shift());
    auto [t, e] = hurwitz_tail(p, J + 1 + q);
    const double f = std::pow(double(1 + q), p);
    return {t * f, e * f};
  }
  const double up = s.gamma_tail(J, c);
  return {0.5 * up, 0.5 * up};
}

// log prod_j (1 + m gamma_j^c) as (value, half-width).
inline std::pair<long double, double> log_gamma_product(const WeightScheme& s, double c, double m) {
  long double acc = 0.0L;
  long J = 0;
  const long jcap = s.dimension() != 0 ? s.dimension() : 2'000'000;
  for (long j = 1; j <= jcap; ++j) {
    const double x = m * std::pow(s.gamma(j), c);
    acc += std::log1p((long double)(x));
    J = j;
    if (s.dimension() == 0 && j >= 64 && x < 1e-7 && (j >= 200'000 || x < 1e-19)) break;
  }
  if (s.dimension() != 0 && J >= s.dimension()) return {acc, 0.0};
  auto [t, e] = gamma_power_tail(s, J, c);
  t *= m;
  e *= m;
  const double xnext = m * std::pow(s.gamma(J + 1), c);
  // sum log(1+x) lies in [T - x_max T / 2, T]
  const double lo = t - e - 0.5 * xnext * (t + e), hi = t + e;
  return {acc + 0.5L * (lo + hi), 0.5 * (hi - lo)};
}

}  // namespace detail

// L = prod_j (1 + gamma_j^{1-delta}) - 1, with the half-width of its enclosure.
inline std::pair<double, double> mdm_L_constant(const WeightScheme& s, double delta) {
  auto [lg, w] = detail::log_gamma_product(s, 1.0 - delta, 1.0);
  const double L = double(std::expm1(lg));
  return {L, (L + 1.0) * std::expm1(w)};
}

inline MdmPlan plan(const WeightScheme& s, double eps, double kappa, double delta, double a, double C0, double C1,
                    std::size_t max_sets = 5'000'000) {
  if (!(eps > 0.0)) throw std::invalid_argument("plan: eps must be positive");
  if (!(kappa > 0.0)) throw std::invalid_argument("plan: kappa must be positive");
  if (!(C0 > 0.0) || !(C1 > 0.0)) throw std::invalid_argument("plan: C0, C1 must be positive");
  if (!std::isfinite(a)) throw std::invalid_argument("plan: anchor must be finite");
  // finitely many non-trivial coordinates behave like rho = infinity
  const bool finite = s.dimension() != 0;
  if (finite && s.dimension() > 24) throw std::invalid_argument("plan: at most 24 non-trivial coordinates");
  if (finite) {
    if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("plan: need 0 < delta < 1");
  } else {
    const double rh = rho(s);
    if (!(rh > 1.0)) throw std::invalid_argument("plan: rho must exceed 1");
    if (!s.r_gen().nondecreasing()) throw std::invalid_argument("plan: r_j must be non-decreasing");
    if (!(2.0 * kappa / rh < delta && delta < (rh - 1.0) / rh))
      throw std::invalid_argument("plan: need 2 kappa / rho < delta < (rho - 1) / rho (rho = " + detail::fmt_num(rh) + ")");
  }
  auto [L, Lt] = mdm_L_constant(s, delta);
  if (!std::isfinite(L)) throw std::domain_error("plan: L diverges");

  MdmPlan P;
  P.scheme_id = s.id();
  P.eps = eps;
  P.kappa = kappa;
  P.delta = delta;
  P.a = a;
  P.C0 = C0;
  P.C1 = C1;
  P.L_const = L;
  P.L_tail = Lt;

  const double scale = L * C0 * C0 / (eps * eps);  // p_u * scale > 1 <=> u active
  std::vector<double> q{0.0};                      // q[j] = C1^2 gamma_j^delta, non-increasing
  auto qj = [&](long j) {
    while (long(q.size()) <= j) q.push_back(C1 * C1 * std::pow(s.gamma(long(q.size())), delta));
    return q[std::size_t(j)];
  };
  long K1 = 0;
  while (!finite && qj(K1 + 1) > 1.0) {
    ++K1;
    if (K1 > 10'000'000) throw std::domain_error("plan: C1^2 gamma_j^delta does not fall below 1");
  }
  // suffix[j] = prod_{k=j}^{K1} q_k, the best gain from indices >= j
  std::vector<double> suffix(std::size_t(K1 + 2), 1.0);
  for (long j = K1; j >= 1; --j) suffix[std::size_t(j)] = suffix[std::size_t(j + 1)] * qj(j);
  auto best_from = [&](long j) { return j <= K1 ? suffix[std::size_t(j)] : qj(j); };

  std::vector<long> u;
  std::function<void(long, double)> dfs = [&](long start, double p) {
    for (long j = start;; ++j) {
      if (finite && j > s.dimension()) break;
      if (!finite && !(p * best_from(j) * scale > 1.0)) break;
      const double np = p * qj(j);
      u.push_back(j);
      if (np * scale > 1.0) {
        const double ratio = np * scale;
        const double nu = std::floor(std::exp(std::log(ratio) / (2.0 * kappa)));
        if (!(nu < 9e18)) throw std::overflow_error("plan: n_u overflows");
        P.active.push_back({u, np, std::max<long>(1, long(nu))});
        if (P.active.size() > max_sets) throw std::length_error("plan: active set exceeds the configured limit");
      }
      dfs(j + 1, np);
      u.pop_back();
    }
  };
  dfs(1, 1.0);
  for (const auto& as : P.active) P.d_eps = std::max(P.d_eps, int(as.u.size()));
  return P;
}

// A budget below one interior grid per coordinate yields the zero algorithm.
inline bool zero_rule(const LevelFamily& fam, const ActiveSet& as) {
  double need = 1.0;
  for (std::size_t m = 0; m < as.u.size(); ++m) need *= double(fam.size(1));
  return double(as.n) < need;
}

// ---------------------------------------------------------------- flat rules

struct TensorTerm {
  double coef = 0.0;
  std::vector<std::pair<long, int>> factors;  // (coordinate, level), sorted by coordinate
};

// Tensor description of an assembled rule:
//   f(a) + sum_t coef_t prod_{(j,i)} (A_i - A_i(1) delta_a)_j
struct TensorForm {
  int r = 2;
  double delta = 0.2;
  int lead = 3;
  std::vector<TensorTerm> terms;
};

struct FlatRule {
  double anchor = 0.0;
  std::vector<AnchoredPoint> points;
  std::vector<double> weights;
  std::optional<TensorForm> form;

  std::size_t size() const { return points.size(); }
  template <class F>
  double apply(F&& f) const {
    detail::CompensatedSum s;
    for (std::size_t i = 0; i < points.size(); ++i) s.add(weights[i] * f(points[i]));
    return double(s.value());
  }
  double weight_sum() const {
    detail::CompensatedSum s;
    for (double w : weights) s.add(w);
    return double(s.value());
  }
};

inline FlatRule assemble(const MdmPlan& P, const LevelFamily& fam) {
  if (fam.anchor() != P.a) throw std::invalid_argument("assemble: family anchor differs from plan anchor");
  std::map<AnchoredPoint, long double> acc;
  TensorForm form;
  form.r = fam.r();
  form.delta = fam.delta();
  form.lead = fam.lead();
  acc[AnchoredPoint(P.a)] += 1.0L;
  for (const auto& as : P.active) {
    if (zero_rule(fam, as)) continue;
    const SmolyakRule sr = smolyak_rule(as.u, as.n, fam);
    if (sr.zero) continue;
    for (const auto& t : sr.terms) {
      if (!t.interior()) continue;
      TensorTerm tt;
      tt.coef = t.coef;
      for (std::size_t m = 0; m < as.u.size(); ++m) tt.factors.push_back({as.u[m], t.level[m]});
      form.terms.push_back(std::move(tt));
    }
    for (const auto& [x, w] : smolyak_points(sr, fam, true))
      for (const auto& [y, sg] : anchored_component_points(as.u, x)) acc[y] += (long double)(sg) * w;
  }
  FlatRule F;
  F.anchor = P.a;
  for (const auto& [x, w] : acc) {
    if (w == 0.0L) continue;
    F.points.push_back(x);
    F.weights.push_back(double(w));
  }
  F.form = std::move(form);
  return F;
}

// ---------------------------------------------------------------- cost

struct MdmCost {
  double exact = 0.0;  // sum over flat-rule points of $(Act_a(x))
  double bound = 0.0;  // $(0) + sum_u n_u 2^{|u|} $(|u|)
};

inline MdmCost mdm_cost(const MdmPlan& P, const FlatRule& F, const CostModel& cm) {
  MdmCost c;
  detail::CompensatedSum ex, bd;
  for (const auto& x : F.points) ex.add(cm(long(x.act())));
  bd.add(cm(0));
  for (const auto& as : P.active) bd.add(double(as.n) * std::ldexp(1.0, int(as.u.size())) * cm(long(as.u.size())));
  c.exact = double(ex.value());
  c.bound = double(bd.value());
  return c;
}

// ---------------------------------------------------------------- error bound

struct MdmErrorBound {
  double bound = 0.0;
  double active_part = 0.0;    // sum over non-zero rules of gamma_u b_u^2
  double inactive_part = 0.0;  // zero-algorithm mass of all other u
  double B_eps = 1.0;
  double C2 = 0.0;
  double c_up = 0.0, C_up = 0.0;
  long zero_rules = 0;
  bool certified = true;
};

// err(A, K) <= C_up(a) (sum_u gamma_u err^2(A_u, m_u))^{1/2}: Smolyak bound for
// sets with a non-zero rule, c_up(a)^{|u|} for every other u.
inline MdmErrorBound mdm_error_bound(const MdmPlan& P, const WeightScheme& s, const LevelFamily& fam,
                                     double tol = 1e-12) {
  MdmErrorBound out;
  const auto cu = c_up(s, P.a, tol);
  const auto Cu = C_up(s, P.a, tol);
  out.c_up = cu.value + cu.tail_bound;
  out.C_up = Cu.value + Cu.tail_bound;
  out.certified = cu.certified && Cu.certified;
  const double c2 = out.c_up * out.c_up;

  long double act = 0.0L, covered = 0.0L;
  for (const auto& as : P.active) {
    const double g = gamma_u(s, as.u);
    const int d = int(as.u.size());
    out.B_eps = std::max(out.B_eps, smolyak_log_factor(d, as.n, P.kappa));
    if (zero_rule(fam, as)) {
      ++out.zero_rules;
      continue;
    }
    const double b = smolyak_error_bound(d, as.n, P.kappa, P.C0, P.C1);
    act += (long double)(g) * b * b;
    covered += (long double)(g) * std::pow((long double)(c2), d);
  }
  auto [lp, w] = detail::log_gamma_product(s, 1.0, c2);
  const long double all = std::expm1(lp + (long double)(w));  // upper end of the enclosure
  out.active_part = double(act);
  out.inactive_part = double(std::max(all - covered, 0.0L));
  out.bound = out.C_up * std::sqrt(out.active_part + out.inactive_part);

  const double sg = s.gamma_tail(0, P.delta / (2.0 * P.kappa));
  out.C2 = std::pow(P.C0 * std::sqrt(P.L_const), 1.0 / P.kappa) *
           std::exp(2.0 * std::pow(P.C1, 1.0 / P.kappa) * sg);
  return out;
}

// ---------------------------------------------------------------- exact error

enum class KErrorMethod { Auto, Structured, Gram };

namespace detail {

// err^2 = sum_{w != 0} ||Q_w||^2 over the orthogonal decomposition of H(K) into
// mean-free tensor blocks. With V the coordinates touched by the rule and
// T_V = prod_{j not in V} k_j(a,a):
//   err^2 = T_V (S_V - 1) + (T_V - 1),
//   S_V = sum_{t,t'} c_t c_t' prod_{j in u_t u u_t'} G~_j prod_{j in V \ (u_t u u_t')} k_j(a,a).
inline ErrorReport structured_error_K(const FlatRule& F, const WeightScheme& s, double tol, GramCache& cache) {
  const TensorForm& form = *F.form;
  std::map<long, int> need;
  for (const auto& t : form.terms)
    for (auto [j, l] : t.factors) need[j] = std::max(need[j], l);
  cache.prepare(need);

  struct Coord {
    std::vector<std::vector<long double>> Gt;  // 0: mean-free anchor evaluation, i >= 1: level difference atom
    long double kap = 0.0L;
    double tail = 0.0;
  };
  std::map<long, Coord> C;
  bool certified = true;
  for (auto [j, l] : need) {
    const LevelGram& g = cache.get(j, l);
    certified = certified && g.certified;
    Coord c;
    const std::size_t P = std::size_t(l) + 1;
    c.Gt.assign(P, std::vector<long double>(P, 0.0L));
    auto Sm = [&](std::size_t i) { return i == 0 ? 0.0L : (long double)(g.mass[i]); };
    for (std::size_t i = 0; i < P; ++i)
      for (std::size_t k = 0; k < P; ++k) {
        // B_i = A_i - S_i delta_a for i >= 1; index 0 is delta_a itself
        const long double Si = Sm(i), Sk = Sm(k);
        long double v = (long double)(g.G[i][k]);
        if (k != 0) v -= Sk * (long double)(g.G[i][0]);
        if (i != 0) v -= Si * (long double)(g.G[0][k]);
        if (i != 0 && k != 0) v += Si * Sk * (long double)(g.G[0][0]);
        c.Gt[i][k] = v;
      }
    c.kap = (long double)(g.G[0][0]);
    const long double ls = 1.0L + std::fabs((long double)(g.mass[P - 1]));
    c.tail = double(g.tail * (ls + 1.0L) * (ls + 1.0L));
    C[j] = std::move(c);
  }

  // terms: index 0 is f(a)
  std::vector<const TensorTerm*> T;
  TensorTerm anchor_term{1.0, {}};
  T.push_back(&anchor_term);
  for (const auto& t : form.terms) T.push_back(&t);
  std::vector<std::vector<std::pair<Coord*, int>>> fac(T.size());
  for (std::size_t t = 0; t < T.size(); ++t)
    for (auto [j, l] : T[t]->factors) fac[t].push_back({&C[j], l});

  const std::size_t NT = T.size();
  std::vector<long double> rowv(NT, 0.0L), rowt(NT, 0.0L);
  parallel_for(NT, [&](std::size_t t) {
    long double acc = 0.0L, tl = 0.0L;
    for (std::size_t t2 = t; t2 < NT; ++t2) {
      if (t == 0 && t2 == 0) continue;
      const auto& A = T[t]->factors;
      const auto& B = T[t2]->factors;
      long double pr = 1.0L, pu = 1.0L;
      std::size_t ia = 0, ib = 0;
      while (ia < A.size() || ib < B.size()) {
        long ja = ia < A.size() ? A[ia].first : std::numeric_limits<long>::max();
        long jb = ib < B.size() ? B[ib].first : std::numeric_limits<long>::max();
        const long j = std::min(ja, jb);
        Coord* c = ja == j ? fac[t][ia].first : fac[t2][ib].first;
        const int la = ja == j ? A[ia].second : 0;
        const int lb = jb == j ? B[ib].second : 0;
        const long double v = c->Gt[std::size_t(la)][std::size_t(lb)] / (1.0L + c->kap);
        pr *= v;
        pu *= std::fabs(v) + c->tail;
        if (ja == j) ++ia;
        if (jb == j) ++ib;
      }
      const long double w = (t == t2 ? 1.0L : 2.0L) * (long double)(T[t]->coef) * T[t2]->coef;
      acc += w * pr;
      tl += std::fabs(w) * (pu - std::fabs(pr));
    }
    rowv[t] = acc;
    rowt[t] = tl;
  });
  long double Sp = 0.0L, St = 0.0L;
  for (std::size_t t = 0; t < NT; ++t) {
    Sp += rowv[t];
    St += rowt[t];
  }
  long double logPV = 0.0L;
  std::vector<long> V;
  for (auto& [j, c] : C) {
    logPV += std::log1p(c.kap);
    V.push_back(j);
  }
  const long double PV = std::exp(logPV);
  const long double E1 = std::expm1(logPV);

  // T_V from the anchored diagonal product over j not in V
  double scale = tol / 8.0;
  detail::ProductBound pb;
  for (int attempt = 0; attempt < 8; ++attempt) {
    pb = detail::anchored_product(s, F.anchor, V, scale, tol / 4.0, {});
    if (pb.tail() <= tol) break;
    scale *= 0.5 * tol / pb.tail();
  }
  certified = certified && pb.certified;
  const long double TV = pb.value;
  const long double Tm1 = TV - 1.0L;
  const long double inner = E1 + PV * Sp;  // S_V - 1
  const long double e2 = TV * inner + Tm1;
  const double t = double(TV * PV * St) + pb.tail() * double(std::fabs(inner) + 1.0L);
  if (t > tol) throw ToleranceError("worst_case_error_K: tolerance unreachable", t);
  return finish_report(double(e2), t, tol, long(F.size()), certified);
}

// err^2 = 1 - 2 sum w + sum w w' K(x, x'), with K(x, x') = K(a, a) prod_{j in U} k_j(x_j, x'_j) / k_j(a, a).
inline ErrorReport gram_error_K(const FlatRule& F, const WeightScheme& s, double tol) {
  const std::size_t n = F.size();
  if (n == 0) return {1.0, 0.0, 0, true};
  const double a = F.anchor;
  double B = 0.0;
  for (double w : F.weights) B += std::fabs(w);
  const double et = tol / (8.0 * B * B);
  auto Kinf = anchored_diagonal(s, a, et);
  bool certified = Kinf.certified;

  // per coordinate: distinct values (anchor first) and ratio table
  std::map<long, std::vector<double>> vals;
  for (const auto& x : F.points)
    for (auto [j, v] : x.active()) vals[j].push_back(v);
  struct Tab {
    std::vector<double> v;
    std::vector<std::vector<double>> r, t;
  };
  std::map<long, Tab> tabs;
  for (auto& [j, vs] : vals) {
    std::sort(vs.begin(), vs.end());
    vs.erase(std::unique(vs.begin(), vs.end()), vs.end());
    Tab T;
    T.v.push_back(a);
    for (double v : vs) T.v.push_back(v);
    const std::size_t m = T.v.size();
    T.r.assign(m, std::vector<double>(m));
    T.t.assign(m, std::vector<double>(m));
    const auto kaa = kernel_eval_1d(s, j, a, a, et);
    for (std::size_t p = 0; p < m; ++p)
      for (std::size_t q = p; q < m; ++q) {
        auto k = kernel_eval_1d(s, j, T.v[p], T.v[q], et);
        certified = certified && k.certified && kaa.certified;
        T.r[p][q] = T.r[q][p] = k.value / kaa.value;
        T.t[p][q] = T.t[q][p] = (k.tail_bound + std::fabs(k.value / kaa.value) * kaa.tail_bound) / (kaa.value - kaa.tail_bound);
      }
    tabs[j] = std::move(T);
  }
  // point coordinates as indices into the tables
  std::vector<std::vector<std::pair<const Tab*, std::size_t>>> idx(n);
  std::vector<std::vector<long>> coords(n);
  for (std::size_t i = 0; i < n; ++i)
    for (auto [j, v] : F.points[i].active()) {
      const Tab& T = tabs[j];
      const std::size_t p = std::size_t(std::lower_bound(T.v.begin() + 1, T.v.end(), v) - T.v.begin());
      idx[i].push_back({&T, p});
      coords[i].push_back(j);
    }
  std::vector<long double> rowv(n), rowt(n);
  parallel_for(n, [&](std::size_t i) {
    long double acc = 0.0L, tl = 0.0L;
    for (std::size_t l = 0; l < n; ++l) {
      long double pr = 1.0L, pu = 1.0L;
      std::size_t ia = 0, ib = 0;
      const auto& A = coords[i];
      const auto& Bc = coords[l];
      while (ia < A.size() || ib < Bc.size()) {
        const long ja = ia < A.size() ? A[ia] : std::numeric_limits<long>::max();
        const long jb = ib < Bc.size() ? Bc[ib] : std::numeric_limits<long>::max();
        const long j = std::min(ja, jb);
        const Tab* T = ja == j ? idx[i][ia].first : idx[l][ib].first;
        const std::size_t p = ja == j ? idx[i][ia].second : 0;
        const std::size_t q = jb == j ? idx[l][ib].second : 0;
        pr *= T->r[p][q];
        pu *= std::fabs(T->r[p][q]) + T->t[p][q];
        if (ja == j) ++ia;
        if (jb == j) ++ib;
      }
      acc += (long double)(F.weights[l]) * pr;
      tl += std::fabs(F.weights[l]) * (pu - std::fabs(pr));
    }
    rowv[i] = (long double)(F.weights[i]) * acc;
    rowt[i] = std::fabs(F.weights[i]) * tl;
  });
  long double quad = 0.0L, qt = 0.0L, ws = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    quad += rowv[i];
    qt += rowt[i];
    ws += F.weights[i];
  }
  const long double e2 = 1.0L - 2.0L * ws + (long double)(Kinf.value) * quad;
  const double t = double((long double)(Kinf.value + Kinf.tail_bound) * qt + Kinf.tail_bound * std::fabs(quad));
  if (t > tol) throw ToleranceError("worst_case_error_K: tolerance unreachable", t);
  return finish_report(double(e2), t, tol, long(n), certified);
}

}  // namespace detail

// Worst-case integration error of a flat rule on the unit ball of H(K).
// Rules carrying a tensor form use the level-Gram route; others the kernel Gram.
inline ErrorReport worst_case_error_K(const FlatRule& F, const WeightScheme& s, double tol = 1e-12,
                                      KErrorMethod method = KErrorMethod::Auto, GramCache* cache = nullptr) {
  if (!(tol > 0.0)) throw std::invalid_argument("worst_case_error_K: tol must be positive");
  for (const auto& x : F.points)
    if (x.anchor() != F.anchor) throw std::invalid_argument("worst_case_error_K: points with different anchors");
  if (method == KErrorMethod::Auto) method = F.form ? KErrorMethod::Structured : KErrorMethod::Gram;
  ErrorReport rep;
  // tol bounds the enclosure of err^2
  if (method == KErrorMethod::Structured) {
    if (!F.form) throw std::invalid_argument("worst_case_error_K: rule has no tensor form");
    const LevelFamily fam(F.form->r, F.form->delta, F.anchor, F.form->lead);
    const bool match = cache && cache->family().same_as(fam) && cache->scheme().id() == s.id();
    if (match) {
      rep = detail::structured_error_K(F, s, tol, *cache);
    } else {
      GramCache local(s, fam);
      rep = detail::structured_error_K(F, s, tol, local);
    }
  } else {
    rep = detail::gram_error_K(F, s, tol);
  }
  return rep;
}

// ---------------------------------------------------------------- L2 approximation variant

// Level 0 maps g to the constant g(a); level i >= 1 is the weighted least-squares
// operator from 2^{i+1} samples onto span{h_0, ..., h_{2^{i-1}-1}}.
class ApproxFamily {
public:
  explicit ApproxFamily(double anchor = 0.0, std::uint64_t seed = 1, LsOptions opt = {})
      : anchor_(anchor), seed_(seed), opt_(opt), cache_(std::make_shared<Cache>()) {
    if (!std::isfinite(anchor)) throw std::invalid_argument("ApproxFamily: anchor must be finite");
  }
  double anchor() const { return anchor_; }
  std::uint64_t seed() const { return seed_; }
  long size(int level) const {
    if (level < 0 || level > kMaxLevel) throw std::out_of_range("ApproxFamily: level out of range");
    return level == 0 ? 1 : 1L << (level + 1);
  }
  long basis_dim(int level) const { return level == 0 ? 1 : 1L << (level - 1); }
  const Approx1D& op(int level) const {
    if (level < 1 || level > kMaxLevel) throw std::out_of_range("ApproxFamily: level out of range");
    std::lock_guard<std::mutex> lk(cache_->m);
    auto& slot = cache_->ops[level];
    if (!slot) slot = std::make_shared<Approx1D>(build_ls_approx(size(level), basis_dim(level), seed_ + std::uint64_t(level), opt_));
    return *slot;
  }
  static constexpr int kMaxLevel = 16;

private:
  struct Cache {
    std::mutex m;
    std::map<int, std::shared_ptr<Approx1D>> ops;
  };
  double anchor_;
  std::uint64_t seed_;
  LsOptions opt_;
  std::shared_ptr<Cache> cache_;
};

struct ApproxBlock {
  std::vector<long> u;
  long n = 0;
  std::vector<SmolyakTerm> terms;  // interior terms only
};

// A(f) = f(a) + sum_u sum_t c_t (prod_{j in u} P_{i_j}) f_u
struct MdmApprox {
  double anchor = 0.0;
  std::vector<ApproxBlock> blocks;
  std::vector<AnchoredPoint> points;  // distinct evaluation points
};

inline MdmApprox assemble_approx(const MdmPlan& P, const ApproxFamily& fam) {
  if (fam.anchor() != P.a) throw std::invalid_argument("assemble_approx: family anchor differs from plan anchor");
  MdmApprox M;
  M.anchor = P.a;
  std::set<AnchoredPoint> pts{AnchoredPoint(P.a)};
  for (const auto& as : P.active) {
    const SmolyakRule sr = smolyak_rule(as.u, as.n, fam);
    if (sr.zero) continue;
    ApproxBlock b{as.u, as.n, {}};
    for (const auto& t : sr.terms) {
      if (!t.interior()) continue;
      b.terms.push_back(t);
      // tensor grid of the term's sample nodes
      const std::size_t d = as.u.size();
      std::vector<const std::vector<double>*> nodes(d);
      for (std::size_t m = 0; m < d; ++m) nodes[m] = &fam.op(t.level[m]).nodes;
      std::vector<std::size_t> idx(d, 0);
      for (;;) {
        std::vector<AnchoredPoint::Entry> e(d);
        for (std::size_t m = 0; m < d; ++m) e[m] = {as.u[m], (*nodes[m])[idx[m]]};
        for (auto& [y, sg] : anchored_component_points(as.u, AnchoredPoint(P.a, e))) pts.insert(y);
        std::size_t m = 0;
        while (m < d && ++idx[m] == nodes[m]->size()) idx[m++] = 0;
        if (m == d) break;
      }
    }
    M.blocks.push_back(std::move(b));
  }
  M.points.assign(pts.begin(), pts.end());
  return M;
}

// ---------------------------------------------------------------- serialization

// Plain-text plan, version 1:
//   hermite-mdm-plan 1
//   scheme <id>
//   eps <e> kappa <k> delta <d> a <a> C0 <c0> C1 <c1> L <L> L_tail <t>
//   sets <count>
//   <|u|> <j_1> ... <j_|u|> <p_u> <n_u>
inline void write_plan(std::ostream& os, const MdmPlan& P) {
  using detail::fmt_num;
  os << "hermite-mdm-plan 1\n";
  os << "scheme " << P.scheme_id << "\n";
  os << "eps " << fmt_num(P.eps) << " kappa " << fmt_num(P.kappa) << " delta " << fmt_num(P.delta) << " a "
     << fmt_num(P.a) << " C0 " << fmt_num(P.C0) << " C1 " << fmt_num(P.C1) << " L " << fmt_num(P.L_const)
     << " L_tail " << fmt_num(P.L_tail) << "\n";
  os << "sets " << P.active.size() << "\n";
  for (const auto& as : P.active) {
    os << as.u.size();
    for (long j : as.u) os << ' ' << j;
    os << ' ' << fmt_num(as.p) << ' ' << as.n << "\n";
  }
  if (!os) throw std::runtime_error("write_plan: stream error");
}

inline MdmPlan read_plan(std::istream& is) {
  std::string line, key;
  if (!std::getline(is, line) || line != "hermite-mdm-plan 1") throw std::runtime_error("read_plan: bad header");
  MdmPlan P;
  if (!std::getline(is, line) || line.rfind("scheme ", 0) != 0) throw std::runtime_error("read_plan: missing scheme");
  P.scheme_id = line.substr(7);
  if (!std::getline(is, line)) throw std::runtime_error("read_plan: missing constants");
  {
    std::istringstream ls(line);
    std::string v;
    std::map<std::string, double> kv;
    while (ls >> key >> v) kv[key] = detail::parse_num(v);
    for (const char* k : {"eps", "kappa", "delta", "a", "C0", "C1", "L", "L_tail"})
      if (!kv.count(k)) throw std::runtime_error(std::string("read_plan: missing ") + k);
    P.eps = kv["eps"], P.kappa = kv["kappa"], P.delta = kv["delta"], P.a = kv["a"];
    P.C0 = kv["C0"], P.C1 = kv["C1"], P.L_const = kv["L"], P.L_tail = kv["L_tail"];
  }
  std::size_t count = 0;
  if (!(is >> key >> count) || key != "sets") throw std::runtime_error("read_plan: missing set count");
  for (std::size_t k = 0; k < count; ++k) {
    ActiveSet as;
    std::size_t d;
    std::string pv;
    if (!(is >> d)) throw std::runtime_error("read_plan: truncated");
    as.u.resize(d);
    for (auto& j : as.u) is >> j;
    is >> pv >> as.n;
    if (!is) throw std::runtime_error("read_plan: truncated");
    as.p = detail::parse_num(pv);
    P.d_eps = std::max(P.d_eps, int(d));
    P.active.push_back(std::move(as));
  }
  return P;
}

// Flat rule, version 1:
//   hermite-flat-rule 1
//   anchor <a>
//   n <count>
//   <weight> <act> <j>:<x> ...
inline void write_flat_rule(std::ostream& os, const FlatRule& F) {
  os << "hermite-flat-rule 1\n";
  os << "anchor " << detail::fmt_num(F.anchor) << "\n";
  os << "n " << F.size() << "\n";
  os << std::setprecision(17);
  for (std::size_t i = 0; i < F.size(); ++i) {
    os << F.weights[i] << ' ' << F.points[i].act();
    for (auto [j, v] : F.points[i].active()) os << ' ' << j << ':' << v;
    os << "\n";
  }
  if (!os) throw std::runtime_error("write_flat_rule: stream error");
}

inline FlatRule read_flat_rule(std::istream& is) {
  std::string line, key;
  if (!std::getline(is, line) || line != "hermite-flat-rule 1") throw std::runtime_error("read_flat_rule: bad header");
  FlatRule F;
  std::string av;
  std::size_t n;
  if (!(is >> key >> av) || key != "anchor") throw std::runtime_error("read_flat_rule: missing anchor");
  F.anchor = detail::parse_num(av);
  if (!(is >> key >> n) || key != "n") throw std::runtime_error("read_flat_rule: missing count");
  for (std::size_t i = 0; i < n; ++i) {
    double w;
    std::size_t act;
    if (!(is >> w >> act)) throw std::runtime_error("read_flat_rule: truncated");
    std::vector<AnchoredPoint::Entry> e;
    for (std::size_t k = 0; k < act; ++k) {
      std::string tok;
      is >> tok;
      const auto c = tok.find(':');
      if (c == std::string::npos) throw std::runtime_error("read_flat_rule: bad entry '" + tok + "'");
      e.push_back({std::stol(tok.substr(0, c)), detail::parse_num(tok.substr(c + 1))});
    }
    F.points.emplace_back(F.anchor, std::move(e));
    F.weights.push_back(w);
  }
  return F;
}

}  // namespace hermite
