#pragma once
// Fourier weight schemes alpha_{nu,j} and closed-form tail sums.

#include <algorithm>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/special_functions/zeta.hpp>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hermite {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

namespace detail {

inline std::string fmt_num(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  // prefer the short form when it round-trips
  for (int p = 1; p <= 17; ++p) {
    char s[64];
    std::snprintf(s, sizeof s, "%.*g", p, v);
    if (std::strtod(s, nullptr) == v) return s;
  }
  return buf;
}

inline double parse_num(std::string_view s) {
  std::string t(s);
  if (t == "inf" || t == "Inf" || t == "INF") return kInf;
  std::size_t pos = 0;
  double v = std::stod(t, &pos);
  if (pos != t.size()) throw std::invalid_argument("bad number: " + t);
  return v;
}

inline std::vector<double> parse_args(std::string_view body) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= body.size()) {
    std::size_t comma = body.find(',', start);
    if (comma == std::string_view::npos) comma = body.size();
    std::string_view tok = body.substr(start, comma - start);
    while (!tok.empty() && tok.front() == ' ') tok.remove_prefix(1);
    while (!tok.empty() && tok.back() == ' ') tok.remove_suffix(1);
    if (!tok.empty()) out.push_back(parse_num(tok));
    start = comma + 1;
  }
  return out;
}

// Sum over nu > N of 2^{-r nu^b}, certified upper bound (r, b > 0).
inline double eg_nu_tail(double r, double b, long N) {
  if (N < 0) N = 0;
  if (b >= 1.0) {
    // nu^b >= nu, geometric domination
    double q = std::exp2(-r);
    return std::exp2(-r * double(N + 1)) / (1.0 - q);
  }
  // decreasing integrand: sum_{nu>N} f(nu) <= int_N^inf f
  const double c = r * std::numbers::ln2;
  const double x = c * std::pow(double(N), b);
  double g = (x == 0.0) ? std::tgamma(1.0 / b) : boost::math::tgamma(1.0 / b, x);
  return g / (b * std::pow(c, 1.0 / b));
}

}  // namespace detail

// Closed-form generator for a positive sequence g(j), j >= 1.
class Generator {
public:
  enum class Form { Constant, Affine, Log };

  static Generator constant(double c) { return Generator(Form::Constant, c, 0.0, 0.0); }
  static Generator affine(double first, double slope) {
    return Generator(Form::Affine, first, slope, 0.0);
  }
  // g(j) = first + slope * log2((j + shift) / (1 + shift))
  static Generator logarithmic(double first, double slope, double shift = 0.0) {
    if (shift < 0.0) throw std::invalid_argument("Generator: log shift must be >= 0");
    return Generator(Form::Log, first, slope, shift);
  }

  double operator()(long j) const {
    switch (form_) {
      case Form::Constant: return first_;
      case Form::Affine: return first_ + slope_ * double(j - 1);
      case Form::Log: return first_ + slope_ * std::log2((double(j) + shift_) / (1.0 + shift_));
    }
    return first_;
  }

  Form form() const { return form_; }
  double first() const { return first_; }
  double slope() const { return form_ == Form::Constant ? 0.0 : slope_; }
  double shift() const { return shift_; }
  bool nondecreasing() const { return slope() >= 0.0; }
  bool is_constant() const { return slope() == 0.0; }

  // liminf g(j) ln2 / ln j
  double growth_rate() const {
    if (is_constant()) return 0.0;
    if (form_ == Form::Affine) return slope_ > 0 ? kInf : -kInf;
    return slope_;
  }

  // Certified upper bound on sum_{j>J} 2^{-c g(j)} (c > 0); +inf if divergent.
  double pow2_tail(long J, double c) const {
    if (J < 0) J = 0;
    if (is_constant()) return kInf;
    if (form_ == Form::Affine) {
      if (slope_ <= 0) return kInf;
      return std::exp2(-c * (*this)(J + 1)) / (1.0 - std::exp2(-c * slope_));
    }
    const double p = c * slope_;
    if (p <= 1.0) return kInf;
    // 2^{-c g(j)} = 2^{-c first} (1+q)^p (j+q)^{-p}; first term explicit, rest by integral
    const double q = shift_;
    const double pref = std::exp2(-c * first_) * std::pow(1.0 + q, p);
    const double first_term = std::exp2(-c * (*this)(J + 1));
    return first_term + pref * std::pow(double(J + 1) + q, 1.0 - p) / (p - 1.0);
  }

  std::string to_string() const {
    using detail::fmt_num;
    switch (form_) {
      case Form::Constant: return "const(" + fmt_num(first_) + ")";
      case Form::Affine: return "affine(" + fmt_num(first_) + "," + fmt_num(slope_) + ")";
      case Form::Log:
        if (shift_ == 0.0) return "log(" + fmt_num(first_) + "," + fmt_num(slope_) + ")";
        return "log(" + fmt_num(first_) + "," + fmt_num(slope_) + "," + fmt_num(shift_) + ")";
    }
    return {};
  }

  // Accepts const(c), affine(a,s), log(a,s[,q]) or a bare number.
  static Generator parse(std::string_view s) {
    auto open = s.find('(');
    if (open == std::string_view::npos) return constant(detail::parse_num(s));
    if (s.back() != ')') throw std::invalid_argument("Generator: missing ')'");
    std::string_view name = s.substr(0, open);
    auto args = detail::parse_args(s.substr(open + 1, s.size() - open - 2));
    if (name == "const" && args.size() == 1) return constant(args[0]);
    if (name == "affine" && args.size() == 2) return affine(args[0], args[1]);
    if (name == "log" && (args.size() == 2 || args.size() == 3))
      return logarithmic(args[0], args[1], args.size() == 3 ? args[2] : 0.0);
    throw std::invalid_argument("Generator: cannot parse '" + std::string(s) + "'");
  }

  bool operator==(const Generator&) const = default;

private:
  Generator(Form f, double a, double s, double q) : form_(f), first_(a), slope_(s), shift_(q) {}
  Form form_;
  double first_;
  double slope_;
  double shift_;
};

enum class SchemeKind { PG, EG, Custom };

class WeightScheme {
public:
  // Multivariate polynomial growth alpha = (nu+1)^{r_j}.
  static WeightScheme pg(Generator r) {
    WeightScheme s(SchemeKind::PG, r, Generator::constant(1.0), 0);
    if (!r.nondecreasing()) throw std::invalid_argument("PG: r_j must be non-decreasing");
    if (r(1) <= 1.0) throw std::invalid_argument("PG: r_1 must exceed 1");
    if (!std::isfinite(r.pow2_tail(0, 1.0)))
      throw std::invalid_argument("PG: sum of 2^{-r_j} diverges for " + r.to_string());
    return s;
  }
  // Multivariate (sub-)exponential growth alpha = 2^{r_j nu^{b_j}}.
  static WeightScheme eg(Generator r, Generator b) {
    WeightScheme s(SchemeKind::EG, r, b, 0);
    if (!r.nondecreasing() || !b.nondecreasing())
      throw std::invalid_argument("EG: r_j and b_j must be non-decreasing");
    if (r(1) <= 0.0 || b(1) <= 0.0) throw std::invalid_argument("EG: r_1, b_1 must be positive");
    if (!std::isfinite(r.pow2_tail(0, 1.0)))
      throw std::invalid_argument("EG: sum of 2^{-r_j} diverges for " + r.to_string());
    return s;
  }
  // Single coordinate kernel k^{[r]}; needs r > 1/2.
  static WeightScheme univariate_pg(double r) {
    if (!(r > 0.5)) throw std::invalid_argument("univariate PG: r must exceed 1/2");
    return WeightScheme(SchemeKind::PG, Generator::constant(r), Generator::constant(1.0), 1);
  }
  static WeightScheme univariate_eg(double r, double b) {
    if (!(r > 0.0) || !(b > 0.0)) throw std::invalid_argument("univariate EG: r, b must be positive");
    return WeightScheme(SchemeKind::EG, Generator::constant(r), Generator::constant(b), 1);
  }
  // table[j-1][nu] = alpha_{nu,j}; nu beyond the row and j beyond the table mean alpha = inf.
  static WeightScheme custom(std::vector<std::vector<double>> table, std::string name = "table") {
    if (table.empty()) throw std::invalid_argument("custom: empty table");
    for (const auto& row : table) {
      if (row.empty() || row[0] != 1.0) throw std::invalid_argument("custom: alpha_{0,j} must be 1");
      for (std::size_t k = 1; k < row.size(); ++k)
        if (!(row[k] > 0.0) || row[k] < row[k - 1])
          throw std::invalid_argument("custom: weights must be positive and non-decreasing in nu");
    }
    WeightScheme s(SchemeKind::Custom, Generator::constant(1.0), Generator::constant(1.0),
                   int(table.size()));
    s.table_ = std::move(table);
    s.name_ = std::move(name);
    return s;
  }

  SchemeKind kind() const { return kind_; }
  // Number of non-trivial coordinates; 0 means infinitely many.
  int dimension() const { return dim_; }
  bool univariate() const { return dim_ == 1 && kind_ != SchemeKind::Custom; }
  bool trivial_coordinate(long j) const { return dim_ != 0 && j > dim_; }
  const Generator& r_gen() const { return r_; }
  const Generator& b_gen() const { return b_; }
  double r(long j) const { return r_(j); }
  double b(long j) const { return b_(j); }

  double alpha(long nu, long j) const {
    if (nu < 0 || j < 1) throw std::invalid_argument("alpha: need nu >= 0, j >= 1");
    if (nu == 0) return 1.0;
    if (trivial_coordinate(j)) return kInf;
    switch (kind_) {
      case SchemeKind::PG: return std::pow(double(nu + 1), r(j));
      case SchemeKind::EG: return std::exp2(r(j) * std::pow(double(nu), b(j)));
      case SchemeKind::Custom: {
        const auto& row = table_[j - 1];
        return std::size_t(nu) < row.size() ? row[nu] : kInf;
      }
    }
    return kInf;
  }

  double inv_alpha(long nu, long j) const {
    if (nu == 0) return 1.0;
    if (trivial_coordinate(j)) return 0.0;
    switch (kind_) {
      case SchemeKind::PG: return std::exp(-r(j) * std::log(double(nu + 1)));
      case SchemeKind::EG: return std::exp2(-r(j) * std::pow(double(nu), b(j)));
      case SchemeKind::Custom: return 1.0 / alpha(nu, j);
    }
    return 0.0;
  }

  // Certified upper bound on sum_{nu>N} alpha_{nu,j}^{-1}.
  double nu_tail(long j, long N) const {
    if (N < 0) N = 0;
    if (trivial_coordinate(j)) return 0.0;
    switch (kind_) {
      case SchemeKind::PG: {
        const double rj = r(j);
        if (rj <= 1.0) return kInf;
        return std::pow(double(N + 1), 1.0 - rj) / (rj - 1.0);
      }
      case SchemeKind::EG: return detail::eg_nu_tail(r(j), b(j), N);
      case SchemeKind::Custom: {
        double s = 0.0;
        const auto& row = table_[j - 1];
        for (std::size_t k = std::size_t(N) + 1; k < row.size(); ++k) s += 1.0 / row[k];
        return s;
      }
    }
    return kInf;
  }

  // sum_{nu>=1} alpha_{nu,j}^{-1}
  double nu_sum(long j) const {
    if (trivial_coordinate(j)) return 0.0;
    if (kind_ == SchemeKind::PG) {
      const double rj = r(j);
      if (rj <= 1.0) return kInf;
      return std::exp2(-rj) * pg_scaled_sum(rj);
    }
    long N = 1;
    double s = 0.0;
    for (;; ++N) {
      double t = inv_alpha(N, j);
      s += t;
      if (kind_ == SchemeKind::Custom && std::size_t(N + 1) >= table_[j - 1].size()) break;
      if (t < 1e-18 * s && nu_tail(j, N) < 1e-17 * s) break;
      if (N > 10000000) break;
    }
    return s + nu_tail(j, N);
  }

  // Certified upper bound on sum_{j>J} sum_{nu>=1} alpha_{nu,j}^{-1}.
  double coord_tail(long J) const {
    if (J < 0) J = 0;
    if (dim_ != 0) {
      double s = 0.0;
      for (long j = J + 1; j <= dim_; ++j) s += nu_sum(j);
      return s;
    }
    const double geo = r_.pow2_tail(J, 1.0);
    if (!std::isfinite(geo)) return kInf;
    const double rs = r(J + 1);
    if (kind_ == SchemeKind::PG) {
      // (nu+1)^{-r_j} <= 2^{-r_j} ((nu+1)/2)^{-r*} for r_j >= r*
      return pg_scaled_sum(rs) * geo;
    }
    // 2^{-r_j nu^{b_j}} <= 2^{-r_j} 2^{-r*(nu^{b*}-1)}
    const double bs = b(J + 1);
    return eg_series(rs, bs) * geo;
  }

  // gamma_j = sup_nu alpha_{nu,1} / alpha_{nu,j}
  double gamma(long j) const {
    if (j < 1) throw std::invalid_argument("gamma: j >= 1");
    if (j == 1) return 1.0;
    if (trivial_coordinate(j)) return 0.0;
    if (kind_ != SchemeKind::Custom) return std::exp2(r(1) - r(j));
    const auto& r1 = table_[0];
    const auto& rj = table_[j - 1];
    double g = 0.0;
    for (std::size_t nu = 1; nu < std::max(r1.size(), rj.size()); ++nu) {
      double a1 = nu < r1.size() ? r1[nu] : kInf;
      double aj = nu < rj.size() ? rj[nu] : kInf;
      if (std::isinf(aj)) continue;
      if (std::isinf(a1)) throw std::domain_error("gamma: unbounded ratio alpha_{nu,1}/alpha_{nu,j}");
      g = std::max(g, a1 / aj);
    }
    return g;
  }

  // Certified upper bound on sum_{j>J} gamma_j^c.
  double gamma_tail(long J, double c) const {
    if (J < 0) J = 0;
    if (dim_ != 0) {
      double s = 0.0;
      for (long j = std::max<long>(J + 1, 2); j <= dim_; ++j) s += std::pow(gamma(j), c);
      if (J == 0) s += 1.0;
      return s;
    }
    return std::exp2(c * r(1)) * r_.pow2_tail(J, c);
  }

  std::string id() const {
    switch (kind_) {
      case SchemeKind::PG:
        return univariate() ? "pg1 r=" + detail::fmt_num(r(1)) : "pg r=" + r_.to_string();
      case SchemeKind::EG:
        return univariate() ? "eg1 r=" + detail::fmt_num(r(1)) + " b=" + detail::fmt_num(b(1))
                            : "eg r=" + r_.to_string() + " b=" + b_.to_string();
      case SchemeKind::Custom: {
        std::string s = "custom table=";
        for (std::size_t j = 0; j < table_.size(); ++j) {
          if (j) s += "|";
          for (std::size_t k = 0; k < table_[j].size(); ++k) {
            if (k) s += ",";
            s += detail::fmt_num(table_[j][k]);
          }
        }
        return s;
      }
    }
    return {};
  }

  // Inverse of id(): "pg r=<gen>", "pg1 r=<num>", "eg r=<gen> b=<gen>",
  // "eg1 r=<num> b=<num>", "custom table=1,4,9|1,8".
  static WeightScheme parse(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string kind, tok;
    in >> kind;
    std::string rs, bs, table;
    while (in >> tok) {
      auto eq = tok.find('=');
      if (eq == std::string::npos) throw std::invalid_argument("scheme: expected key=value, got " + tok);
      std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
      if (key == "r") rs = val;
      else if (key == "b") bs = val;
      else if (key == "table") table = val;
      else throw std::invalid_argument("scheme: unknown key " + key);
    }
    if (kind == "pg") return pg(Generator::parse(rs));
    if (kind == "pg1") return univariate_pg(detail::parse_num(rs));
    if (kind == "eg") return eg(Generator::parse(rs), bs.empty() ? Generator::constant(1.0) : Generator::parse(bs));
    if (kind == "eg1") return univariate_eg(detail::parse_num(rs), bs.empty() ? 1.0 : detail::parse_num(bs));
    if (kind == "custom") {
      std::vector<std::vector<double>> rows;
      std::size_t start = 0;
      while (start <= table.size()) {
        auto bar = table.find('|', start);
        if (bar == std::string::npos) bar = table.size();
        rows.push_back(detail::parse_args(std::string_view(table).substr(start, bar - start)));
        start = bar + 1;
      }
      return custom(rows);
    }
    throw std::invalid_argument("scheme: unknown kind '" + kind + "'");
  }

  const std::vector<std::vector<double>>& table() const { return table_; }

private:
  WeightScheme(SchemeKind k, Generator r, Generator b, int dim) : kind_(k), r_(r), b_(b), dim_(dim) {}

  // 2^r (zeta(r) - 1) = sum_{m>=2} (m/2)^{-r}
  static double pg_scaled_sum(double r) {
    if (r < 10.0) return std::exp2(r) * (boost::math::zeta(r) - 1.0);
    // zeta(r) - 1 loses all digits for large r; sum directly with an integral tail
    double s = 0.0;
    long m = 2;
    for (;; ++m) {
      const double t = std::pow(0.5 * double(m), -r);
      s += t;
      if (t < 1e-18 * s) break;
    }
    return s + std::pow(0.5 * double(m), -r) * double(m) / (r - 1.0);
  }
  // sum_{nu>=1} 2^{-r (nu^b - 1)} with certified tail
  static double eg_series(double r, double b) {
    double s = 0.0;
    long N = 1;
    for (;; ++N) {
      double t = std::exp2(-r * (std::pow(double(N), b) - 1.0));
      s += t;
      if (t < 1e-18 * s || N > 10000000) break;
    }
    const double tail = detail::eg_nu_tail(r, b, N);
    return s + (tail > 0.0 ? std::exp2(r + std::log2(tail)) : 0.0);
  }

  SchemeKind kind_;
  Generator r_;
  Generator b_;
  int dim_;
  std::vector<std::vector<double>> table_;
  std::string name_;
};

}  // namespace hermite
