#pragma once
// Smolyak tensorization of the shifted univariate rules.
//
// The univariate family is indexed by level: level 0 is the point evaluation at
// the anchor. With lead = 0, level i >= 1 is build_An(2^i). With lead = m > 0,
// level 1 is the m-point Gauss-Hermite rule and level i >= 2 is build_An(2^{i-1});
// the cheap first level lets small budgets buy non-zero rules on several
// coordinates at once. Because level 0 sits at the anchor,
// every combination term with a zero level vanishes on anchored components, so
// only "interior" terms (all levels >= 1) cost function values there.
//
// Errors of tensor rules are computed from per-coordinate level Grams
//   G_j[p][q] = sum_{nu>=1} alpha_{nu,j}^{-1} Q_nu(R_p) Q_nu(R_q),
// the H_0 part of the k_j inner product between level rules R_p, R_q.

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "anchored_point.hpp"
#include "detail/numeric.hpp"
#include "detail/parallel.hpp"
#include "kernel.hpp"
#include "quad1d.hpp"
#include "weight_scheme.hpp"

namespace hermite {

class LevelFamily {
public:
  explicit LevelFamily(int r = 2, double delta = 0.2, double anchor = 0.0, int lead = 3)
      : r_(r), delta_(delta), anchor_(anchor), lead_(lead) {
    if (r < 1) throw std::invalid_argument("LevelFamily: r must be >= 1");
    if (lead < 0 || lead > 9) throw std::invalid_argument("LevelFamily: lead must lie in [0, 9]");
    if (!(delta > 0.0 && delta < 0.25)) throw std::invalid_argument("LevelFamily: delta must lie in (0, 1/4)");
    if (!std::isfinite(anchor)) throw std::invalid_argument("LevelFamily: anchor must be finite");
    cache_ = std::make_shared<Cache>();
  }

  int r() const { return r_; }
  double delta() const { return delta_; }
  double anchor() const { return anchor_; }
  int lead() const { return lead_; }

  // Node count of the level rule, without building it.
  long size(int level) const {
    if (level < 0 || level > kMaxLevel) throw std::out_of_range("LevelFamily: level out of range");
    if (level == 0) return 1;
    if (lead_ > 0 && level == 1) return lead_;
    const Schedule s = schedule(dyadic(level), r_, delta_);
    const long q = (r_ + 1) / 2;
    long t = 0;
    for (long m : s.m_vec) t += (m + q - 1) / q * q;
    return t;
  }

  const Rule1D& rule(int level) const {
    if (level < 0 || level > kMaxLevel) throw std::out_of_range("LevelFamily: level out of range");
    std::lock_guard<std::mutex> lk(cache_->m);
    auto& slot = cache_->rules[level];
    if (!slot) {
      Rule1D R;
      if (level == 0) {
        R.nodes = {anchor_};
        R.weights = {1.0};
      } else if (lead_ > 0 && level == 1) {
        auto [x, w] = detail::gauss_hermite(lead_);
        R.nodes = std::move(x);
        R.weights = std::move(w);
      } else {
        R = build_An(dyadic(level), r_, delta_);
      }
      slot = std::make_shared<Rule1D>(std::move(R));
    }
    return *slot;
  }

  double mass(int level) const { return level == 0 ? 1.0 : rule(level).weight_sum(); }

  // Largest level whose rule fits in n evaluations (0 if none does).
  int level_for_budget(long n) const {
    int i = 0;
    while (i < kMaxLevel && size(i + 1) <= n) ++i;
    return i;
  }

  static constexpr int kMaxLevel = 24;

  bool same_as(const LevelFamily& o) const {
    return r_ == o.r_ && delta_ == o.delta_ && anchor_ == o.anchor_ && lead_ == o.lead_;
  }

private:
  struct Cache {
    std::mutex m;
    std::map<int, std::shared_ptr<Rule1D>> rules;
  };
  long dyadic(int level) const { return 1L << (lead_ > 0 ? level - 1 : level); }

  int r_;
  double delta_;
  double anchor_;
  int lead_;
  std::shared_ptr<Cache> cache_;
};

struct LevelGram {
  long j = 1;
  int max_level = 0;
  std::vector<std::vector<double>> G;  // (max_level+1)^2, H_0 part of <R_p, R_q>_{k_j}
  std::vector<double> mass;           // R_p(1)
  double tail = 0.0;                  // bound on |error| of every G entry
  bool certified = true;
  double kappa() const { return G[0][0]; }  // k_j(a,a) - 1
};

namespace detail {

struct GramOut {
  std::vector<std::vector<double>> G;
  double tail = 0.0;
};

inline std::pair<double, double> atom_masses(const Rule1D& R) {
  long double B = 0.0L, W = 0.0L;
  for (std::size_t i = 0; i < R.size(); ++i) {
    B += std::fabs(R.weights[i]);
    W += std::fabs(R.weights[i]) * std::exp(0.25 * R.nodes[i] * R.nodes[i]);
  }
  return {double(B), double(W)};
}

// Truncated series sum_{nu=1}^N alpha^{-1} Q_nu(R_p) Q_nu(R_q); the Cramer bound
// |Q_nu(R)| <= sum |w| e^{x^2/4} controls the remainder.
inline GramOut series_gram(const std::vector<const Rule1D*>& atoms, const WeightScheme& s, long j, long N,
                           double Wmax) {
  const std::size_t P = atoms.size();
  std::vector<std::vector<double>> Q(P);
  for (std::size_t p = 0; p < P; ++p) Q[p] = hermite_moments(atoms[p]->nodes, atoms[p]->weights, N);
  GramOut out;
  out.G.assign(P, std::vector<double>(P, 0.0));
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t q = p; q < P; ++q) {
      long double acc = 0.0L;
      for (long nu = 1; nu <= N; ++nu)
        acc += (long double)(s.inv_alpha(nu, j)) * Q[p][std::size_t(nu)] * Q[q][std::size_t(nu)];
      out.G[p][q] = out.G[q][p] = double(acc);
    }
  out.tail = s.kind() == SchemeKind::Custom ? 0.0 : Wmax * Wmax * s.nu_tail(j, N);
  return out;
}

// Bilinear version of the Laplace-Mehler route for alpha_nu = (nu+1)^r.
inline GramOut spectral_pg_gram(const std::vector<const Rule1D*>& atoms, double r, double tol) {
  const std::size_t P = atoms.size();
  const std::size_t E = P * (P + 1) / 2;
  double B = 0.0, W = 0.0;
  std::vector<double> S(P);
  for (std::size_t p = 0; p < P; ++p) {
    auto [b, w] = atom_masses(*atoms[p]);
    B = std::max(B, b);
    W = std::max(W, w);
    S[p] = atoms[p]->weight_sum();
  }
  const double lg = std::lgamma(r);
  const double G = std::exp(lg);
  const double X = 2.0 * std::log(2.0 * W * W / (B * B));
  const auto win = laplace_window(r, X, 1e-3 * tol * G / (B * B));
  const double trunc = B * B * win.trunc_bound / G;

  const double s_star = 2e-3;
  const double tau = 1e-4 * tol * G;
  const long Nmax = std::max<long>(
      64, long(std::ceil(std::log(std::max(W * W / (-std::expm1(-s_star) * tau), 2.0)) / s_star)));
  std::vector<std::vector<double>> Q(P);
  for (std::size_t p = 0; p < P; ++p) Q[p] = hermite_moments(atoms[p]->nodes, atoms[p]->weights, Nmax);
  // interleaved moments: Qi[nu*P + p]
  std::vector<double> Qi(std::size_t(Nmax + 1) * P);
  for (long nu = 0; nu <= Nmax; ++nu)
    for (std::size_t p = 0; p < P; ++p) Qi[std::size_t(nu) * P + p] = Q[p][std::size_t(nu)];

  struct Node {
    double x, w;
    std::size_t p;
  };
  std::vector<Node> un;
  for (std::size_t p = 0; p < P; ++p)
    for (std::size_t i = 0; i < atoms[p]->size(); ++i) un.push_back({atoms[p]->nodes[i], atoms[p]->weights[i], p});
  std::sort(un.begin(), un.end(), [](const Node& a, const Node& b) { return a.x < b.x; });

  auto tri = [P](std::size_t p, std::size_t q) { return p * P - p * (p + 1) / 2 + q; };  // p <= q

  auto integrand = [&](double v) {
    std::vector<double> out(E + 1, 0.0);
    const double s = std::exp(v);
    const double pw = std::exp(r * v - s - lg);
    if (s >= s_star) {
      const double q = std::exp(-s);
      std::vector<long double> acc(E, 0.0L);
      long double tq = 1.0L;
      long N = Nmax;
      for (long nu = 1; nu <= Nmax; ++nu) {
        tq *= q;
        const double* Qn = &Qi[std::size_t(nu) * P];
        for (std::size_t a = 0; a < P; ++a) {
          const long double ta = tq * Qn[a];
          for (std::size_t b = a; b < P; ++b) acc[tri(a, b)] += ta * Qn[b];
        }
        if (tq * W * W < 1e-3L * (long double)(tau) * (1.0L - q)) {
          N = nu;
          break;
        }
      }
      for (std::size_t e = 0; e < E; ++e) out[e] = pw * double(acc[e]);
      out[E] = pw * W * W * std::exp(-double(N + 1) * s) / (-std::expm1(-s));
    } else {
      const double t = std::exp(-s);
      const double omt2 = -std::expm1(-2.0 * s);
      const double pref = -0.5 * std::log(omt2);
      const double target = 1e-4 * tau / std::max(pw * G, 1e-300);
      const double Ecut = std::max(40.0, std::log(W * W / target) + pref);
      const double width = std::sqrt(2.0 * omt2 * Ecut / t);
      const double c1 = t / (2.0 * omt2), c2 = t / (2.0 * (1.0 + t));
      std::vector<long double> F(P * P, 0.0L);
      std::vector<long double> y(P);
      std::size_t lo = 0;
      const std::size_t n = un.size();
      for (std::size_t i = 0; i < n; ++i) {
        while (un[lo].x < un[i].x - width) ++lo;
        std::fill(y.begin(), y.end(), 0.0L);
        const double xi = un[i].x;
        for (std::size_t l = lo; l < n && un[l].x <= xi + width; ++l) {
          const double d = xi - un[l].x;
          y[un[l].p] += un[l].w * std::exp(pref - c1 * d * d + c2 * (xi * xi + un[l].x * un[l].x));
        }
        for (std::size_t q = 0; q < P; ++q) F[un[i].p * P + q] += un[i].w * y[q];
      }
      for (std::size_t a = 0; a < P; ++a)
        for (std::size_t b = a; b < P; ++b) {
          const long double f = 0.5L * (F[a * P + b] + F[b * P + a]) - (long double)(S[a]) * S[b];
          out[tri(a, b)] = pw * double(f);
        }
      out[E] = pw * W * W * std::exp(pref - Ecut);
    }
    return out;
  };

  double h = 0.4;
  long K = long(std::ceil((win.vmax - win.vmin) / h));
  std::vector<std::vector<double>> g(static_cast<std::size_t>(K + 1));
  parallel_for(g.size(), [&](std::size_t k) { g[k] = integrand(win.vmin + double(k) * h); });
  std::vector<double> Th(E, 0.0);
  double worst = 0.0;
  for (int level = 0; level < 5; ++level) {
    std::vector<std::vector<double>> odd(static_cast<std::size_t>(K));
    parallel_for(odd.size(), [&](std::size_t k) { odd[k] = integrand(win.vmin + (double(k) + 0.5) * h); });
    std::vector<std::vector<double>> fine(static_cast<std::size_t>(2 * K + 1));
    for (long k = 0; k <= K; ++k) fine[std::size_t(2 * k)] = std::move(g[std::size_t(k)]);
    for (long k = 0; k < K; ++k) fine[std::size_t(2 * k + 1)] = std::move(odd[std::size_t(k)]);
    g.swap(fine);
    K *= 2;
    h *= 0.5;
    long double tl = 0.0L;
    for (long k = 0; k <= K; ++k) tl += g[std::size_t(k)][E];
    const double tt = double(tl) * h;
    worst = 0.0;
    for (std::size_t e = 0; e < E; ++e) {
      long double full = 0.0L, half = 0.0L, scale = 0.0L;
      for (long k = 0; k <= K; ++k) {
        const double f = g[std::size_t(k)][e];
        full += f;
        if (k % 2 == 0) half += f;
        scale += std::fabs(f);
      }
      Th[e] = double(full) * h;
      const double T2h = double(half) * 2.0 * h;
      const double Sc = double(scale) * h + 1e-300;
      const double rel = std::fabs(Th[e] - T2h) / Sc;
      worst = std::max(worst, Sc * rel * rel * 16.0);
    }
    worst += trunc + tt;
    if (worst <= tol) break;
  }
  GramOut out;
  out.G.assign(P, std::vector<double>(P, 0.0));
  for (std::size_t a = 0; a < P; ++a)
    for (std::size_t b = a; b < P; ++b) out.G[a][b] = out.G[b][a] = Th[tri(a, b)];
  out.tail = worst;
  return out;
}

}  // namespace detail

// Level Gram of coordinate j over levels 0..max_level. tol bounds the absolute
// error of each entry; it is a target, the achieved bound is reported in tail.
inline LevelGram level_gram(const WeightScheme& s, long j, const LevelFamily& fam, int max_level,
                            double tol = 1e-20, long series_cap = 20000) {
  if (max_level < 0) throw std::invalid_argument("level_gram: max_level must be >= 0");
  if (!(tol > 0.0)) throw std::invalid_argument("level_gram: tol must be positive");
  LevelGram out;
  out.j = j;
  out.max_level = max_level;
  std::vector<const Rule1D*> atoms;
  for (int i = 0; i <= max_level; ++i) {
    atoms.push_back(&fam.rule(i));
    out.mass.push_back(fam.mass(i));
  }
  const std::size_t P = atoms.size();
  if (s.trivial_coordinate(j)) {
    out.G.assign(P, std::vector<double>(P, 0.0));
    return out;
  }
  double Wmax = 0.0;
  for (auto* R : atoms) Wmax = std::max(Wmax, detail::atom_masses(*R).second);
  long N = -1;
  if (s.kind() == SchemeKind::Custom) {
    N = long(s.table()[std::size_t(j - 1)].size()) - 1;
  } else {
    N = detail::series_length(s, j, Wmax * Wmax, tol, series_cap);
  }
  detail::GramOut g;
  if (N >= 0) {
    g = detail::series_gram(atoms, s, j, N, Wmax);
  } else if (s.kind() == SchemeKind::PG) {
    g = detail::spectral_pg_gram(atoms, s.r(j), tol);
    out.certified = false;
  } else {
    throw ToleranceError("level_gram: series too long for this coordinate", tol);
  }
  out.G = std::move(g.G);
  out.tail = g.tail;
  return out;
}

// Level Grams shared between error evaluations; grams for a coordinate are
// recomputed only when a higher level is requested.
class GramCache {
public:
  GramCache(WeightScheme s, LevelFamily fam, double tol = 1e-20) : s_(std::move(s)), fam_(std::move(fam)), tol_(tol) {}
  const WeightScheme& scheme() const { return s_; }
  const LevelFamily& family() const { return fam_; }
  double tol() const { return tol_; }

  const LevelGram& get(long j, int level) {
    auto it = grams_.find(j);
    if (it == grams_.end() || it->second.max_level < level) {
      grams_[j] = level_gram(s_, j, fam_, level, tol_);
      it = grams_.find(j);
    }
    return it->second;
  }
  // Computes every missing (coordinate, level) up front so that later lookups
  // do not depend on request order.
  void prepare(const std::map<long, int>& needs) {
    std::vector<std::pair<long, int>> todo;
    for (auto [j, l] : needs) {
      auto it = grams_.find(j);
      if (it == grams_.end() || it->second.max_level < l) todo.push_back({j, l});
    }
    std::vector<LevelGram> out(todo.size());
    detail::parallel_for(todo.size(), [&](std::size_t k) { out[k] = level_gram(s_, todo[k].first, fam_, todo[k].second, tol_); });
    for (std::size_t k = 0; k < todo.size(); ++k) grams_[todo[k].first] = std::move(out[k]);
  }

private:
  WeightScheme s_;
  LevelFamily fam_;
  double tol_;
  std::map<long, LevelGram> grams_;
};

struct SmolyakTerm {
  std::vector<int> level;  // per coordinate of u, in u's order
  double coef = 0.0;
  bool interior() const {
    return std::all_of(level.begin(), level.end(), [](int l) { return l >= 1; });
  }
};

struct SmolyakRule {
  std::vector<long> u;
  std::vector<SmolyakTerm> terms;  // combination terms with non-zero coefficient
  long evaluations = 0;            // sum of interior grid sizes
  bool zero = false;               // budget below one level per coordinate
  int max_level() const {
    int m = 0;
    for (const auto& t : terms)
      for (int l : t.level) m = std::max(m, l);
    return m;
  }
};

namespace detail {

inline void compositions(int total, int parts, std::vector<int>& cur, std::vector<std::vector<int>>& out) {
  if (parts == 1) {
    cur.push_back(total);
    out.push_back(cur);
    cur.pop_back();
    return;
  }
  for (int first = 1; first <= total - (parts - 1); ++first) {
    cur.push_back(first);
    compositions(total - first, parts - 1, cur, out);
    cur.pop_back();
  }
}

// c_i = sum_{z in {0,1}^d} (-1)^{|z|} [i + z in I]
inline double combination_coef(const std::vector<int>& i, const std::set<std::vector<int>>& I) {
  const std::size_t d = i.size();
  double c = 0.0;
  std::vector<int> k(d);
  for (unsigned z = 0; z < (1u << d); ++z) {
    int sgn = 1;
    for (std::size_t m = 0; m < d; ++m) {
      k[m] = i[m] + int((z >> m) & 1u);
      if ((z >> m) & 1u) sgn = -sgn;
    }
    if (I.count(k)) c += sgn;
  }
  return c;
}

template <class Fam>
long interior_count(const std::set<std::vector<int>>& I, const Fam& fam) {
  long total = 0;
  for (const auto& i : I) {
    if (combination_coef(i, I) == 0.0) continue;
    long g = 1;
    for (int l : i) g *= fam.size(l);
    total += g;
  }
  return total;
}

}  // namespace detail

// Combination rule over a downward-closed level set grown in total-degree order
// (ties lexicographic) until the next index would exceed n interior evaluations.
// Fam provides size(level) and kMaxLevel.
template <class Fam>
SmolyakRule smolyak_rule(const std::vector<long>& u, long n, const Fam& fam) {
  if (u.empty()) throw std::invalid_argument("smolyak_rule: u must be non-empty");
  if (!std::is_sorted(u.begin(), u.end()) || std::adjacent_find(u.begin(), u.end()) != u.end() || u.front() < 1)
    throw std::invalid_argument("smolyak_rule: u must be sorted distinct positive indices");
  if (n < 0) throw std::invalid_argument("smolyak_rule: n must be >= 0");
  const int d = int(u.size());
  SmolyakRule out;
  out.u = u;
  std::set<std::vector<int>> I;
  long count = 0;
  bool stop = false;
  for (int t = d; !stop; ++t) {
    std::vector<std::vector<int>> cand;
    std::vector<int> cur;
    detail::compositions(t, d, cur, cand);
    for (const auto& c : cand) {
      if (*std::max_element(c.begin(), c.end()) > Fam::kMaxLevel) {
        stop = true;
        break;
      }
      I.insert(c);
      const long cnt = detail::interior_count(I, fam);
      if (cnt > n) {
        I.erase(c);
        stop = true;
        break;
      }
      count = cnt;
    }
  }
  out.evaluations = count;
  if (I.empty()) {
    out.zero = true;
    return out;
  }
  // closure: zero levels allowed where the interior index has a 1
  std::set<std::vector<int>> full;
  for (const auto& i : I) {
    std::vector<std::size_t> ones;
    for (std::size_t m = 0; m < i.size(); ++m)
      if (i[m] == 1) ones.push_back(m);
    for (unsigned z = 0; z < (1u << ones.size()); ++z) {
      auto k = i;
      for (std::size_t b = 0; b < ones.size(); ++b)
        if ((z >> b) & 1u) k[ones[b]] = 0;
      full.insert(k);
    }
  }
  for (const auto& i : full) {
    const double c = detail::combination_coef(i, full);
    if (c != 0.0) out.terms.push_back({i, c});
  }
  return out;
}

// Points and weights of the rule; interior_only drops terms with a zero level,
// which contribute nothing on functions vanishing at the anchor.
inline std::vector<std::pair<AnchoredPoint, double>> smolyak_points(const SmolyakRule& sr, const LevelFamily& fam,
                                                                    bool interior_only = false) {
  std::map<AnchoredPoint, double> acc;
  const std::size_t d = sr.u.size();
  for (const auto& t : sr.terms) {
    if (interior_only && !t.interior()) continue;
    std::vector<const Rule1D*> R(d);
    for (std::size_t m = 0; m < d; ++m) R[m] = &fam.rule(t.level[m]);
    std::vector<std::size_t> idx(d, 0);
    for (;;) {
      std::vector<AnchoredPoint::Entry> e;
      double w = t.coef;
      for (std::size_t m = 0; m < d; ++m) {
        e.push_back({sr.u[m], R[m]->nodes[idx[m]]});
        w *= R[m]->weights[idx[m]];
      }
      acc[AnchoredPoint(fam.anchor(), std::move(e))] += w;
      std::size_t m = 0;
      while (m < d && ++idx[m] == R[m]->size()) idx[m++] = 0;
      if (m == d) break;
    }
  }
  std::vector<std::pair<AnchoredPoint, double>> out;
  for (auto& [p, w] : acc)
    if (w != 0.0) out.push_back({p, w});
  return out;
}

// Worst-case integration error of the full combination rule on H(k_{u_1} x ... x k_{u_d}),
// from the level Grams of the coordinates (grams[m] belongs to u[m]).
inline ErrorReport smolyak_error(const SmolyakRule& sr, const std::vector<const LevelGram*>& grams) {
  const std::size_t d = sr.u.size();
  if (grams.size() != d) throw std::invalid_argument("smolyak_error: one gram per coordinate");
  ErrorReport rep;
  rep.cost = sr.evaluations;
  if (sr.zero || sr.terms.empty()) {
    rep.err = 1.0;
    return rep;
  }
  for (std::size_t m = 0; m < d; ++m) {
    if (grams[m]->max_level < sr.max_level()) throw std::invalid_argument("smolyak_error: gram has too few levels");
    rep.certified = rep.certified && grams[m]->certified;
  }
  long double mean = 0.0L;
  for (const auto& t : sr.terms) {
    long double pr = t.coef;
    for (std::size_t m = 0; m < d; ++m) pr *= grams[m]->mass[std::size_t(t.level[m])];
    mean += pr;
  }
  long double e2 = (1.0L - mean) * (1.0L - mean);
  long double tail = 0.0L;
  for (const auto& t : sr.terms)
    for (const auto& t2 : sr.terms) {
      long double sum = 0.0L, up = 0.0L;
      for (unsigned w = 1; w < (1u << d); ++w) {
        long double pr = 1.0L, pu = 1.0L;
        for (std::size_t m = 0; m < d; ++m) {
          const std::size_t a = std::size_t(t.level[m]), b = std::size_t(t2.level[m]);
          if ((w >> m) & 1u) {
            const double g = grams[m]->G[a][b];
            pr *= g;
            pu *= std::fabs(g) + grams[m]->tail;
          } else {
            const long double ss = (long double)(grams[m]->mass[a]) * grams[m]->mass[b];
            pr *= ss;
            pu *= std::fabs(ss);
          }
        }
        sum += pr;
        up += pu - std::fabs(pr);
      }
      e2 += (long double)(t.coef) * t2.coef * sum;
      tail += std::fabs((long double)(t.coef) * t2.coef) * up;
    }
  return detail::finish_report(double(e2), double(tail), double(tail), sr.evaluations, rep.certified);
}

inline bool same_terms(const SmolyakRule& a, const SmolyakRule& b) {
  if (a.terms.size() != b.terms.size()) return false;
  for (std::size_t k = 0; k < a.terms.size(); ++k)
    if (a.terms[k].level != b.terms[k].level || a.terms[k].coef != b.terms[k].coef) return false;
  return true;
}

// C0 C1^d (1 + ln(n+1)/max(d-1,1))^{(kappa+1)(d-1)} (n+1)^{-kappa}
inline double smolyak_log_factor(int d, long n, double kappa) {
  if (d < 1) throw std::invalid_argument("smolyak bound: |u| must be >= 1");
  const double base = 1.0 + std::log(double(n) + 1.0) / double(std::max(d - 1, 1));
  return std::pow(base, (kappa + 1.0) * double(d - 1));
}

inline double smolyak_error_bound(int d, long n, double kappa, double C0, double C1) {
  if (n < 0) throw std::invalid_argument("smolyak_error_bound: n must be >= 0");
  return C0 * std::pow(C1, d) * smolyak_log_factor(d, n, kappa) * std::pow(double(n) + 1.0, -kappa);
}

struct CalibrationSample {
  int d = 0;
  long n = 0;        // largest budget at which this rule is used
  long evaluations = 0;
  double err = 0.0;  // c_up^d * err(rule, k_1^{(x)d})
  double ratio = 0.0;
};

struct SmolyakCalibration {
  double kappa = 0.0;
  double C0 = 0.0, C1 = 0.0;
  double M1 = 0.0, M2 = 0.0;
  double c_up = 0.0;
  long n_max = 0;
  std::vector<CalibrationSample> samples;
};

// Upper envelope fit of the Smolyak bound to measured errors for |u| in {1, 2}:
// M_d = max over budgets of c_up^d err / (log factor (n+1)^{-kappa}),
// C1 = M2 / M1 and C0 = M1^2 / M2, so the bound holds at every measured budget.
// Budgets below the first interior grid give the zero rule and are excluded.
inline SmolyakCalibration calibrate_smolyak(GramCache& cache, double kappa, long n_max, double c_up) {
  if (!(kappa > 0.0)) throw std::invalid_argument("calibrate_smolyak: kappa must be positive");
  const LevelFamily& fam = cache.family();
  SmolyakCalibration cal;
  cal.kappa = kappa;
  cal.c_up = c_up;
  cal.n_max = n_max;
  for (int d = 1; d <= 2; ++d) {
    long n = 1;
    for (int m = 0; m < d; ++m) n *= fam.size(1);
    std::vector<long> u(static_cast<std::size_t>(d));
    for (int m = 0; m < d; ++m) u[std::size_t(m)] = m + 1;
    std::vector<std::pair<long, SmolyakRule>> rules;  // (first budget, rule)
    long b = n;
    while (b <= n_max) {
      SmolyakRule sr = smolyak_rule(u, b, fam);
      // next budget at which the rule changes: grow until evaluations differ
      long lo = b, hi = b * 2;
      while (same_terms(smolyak_rule(u, hi, fam), sr)) hi *= 2;
      while (lo + 1 < hi) {
        long mid = lo + (hi - lo) / 2;
        if (same_terms(smolyak_rule(u, mid, fam), sr)) lo = mid;
        else hi = mid;
      }
      rules.push_back({std::min(hi - 1, n_max), std::move(sr)});
      b = hi;
    }
    int top = 0;
    for (auto& [nb, sr] : rules) top = std::max(top, sr.max_level());
    std::vector<const LevelGram*> g(std::size_t(d), &cache.get(1, top));
    double M = 0.0;
    for (auto& [nb, sr] : rules) {
      const auto rep = smolyak_error(sr, g);
      CalibrationSample cs;
      cs.d = d;
      cs.n = nb;
      cs.evaluations = sr.evaluations;
      cs.err = std::pow(c_up, d) * (rep.err + rep.tail_bound);
      cs.ratio = cs.err / (smolyak_log_factor(d, nb, kappa) * std::pow(double(nb) + 1.0, -kappa));
      M = std::max(M, cs.ratio);
      cal.samples.push_back(cs);
    }
    (d == 1 ? cal.M1 : cal.M2) = M;
  }
  if (!(cal.M1 > 0.0) || !(cal.M2 > 0.0)) throw std::runtime_error("calibrate_smolyak: no admissible budgets below n_max");
  cal.C1 = cal.M2 / cal.M1;
  cal.C0 = cal.M1 * cal.M1 / cal.M2;
  return cal;
}

}  // namespace hermite
