#ifndef TOKENSCREEN_EXTENSIONS_HPP
#define TOKENSCREEN_EXTENSIONS_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hyp1f1.hpp"
#include "quadrature.hpp"
#include "screening.hpp"

namespace tokenscreen {

// Heterogeneous utility scale q(r): type r values the answer at q(r) e^{-rt}.
// q and its derivative are supplied together; a finite-difference consistency
// check guards against mismatched pairs.
struct ValuationProfile {
  std::function<double(double)> q;
  std::function<double(double)> qprime;

  static ValuationProfile constant() {
    ValuationProfile v;
    v.q = [](double) { return 1.0; };
    v.qprime = [](double) { return 0.0; };
    return v;
  }

  // q(r) = e^{k r}
  static ValuationProfile exponential(double k) {
    ValuationProfile v;
    v.q = [k](double r) { return std::exp(k * r); };
    v.qprime = [k](double r) { return k * std::exp(k * r); };
    return v;
  }

  // accepted spellings: "1", "exp(r)", "exp(-r)", "exp(<num>*r)"
  static ValuationProfile parse(const std::string& s) {
    if (s == "1") return constant();
    if (s == "exp(r)") return exponential(1.0);
    if (s == "exp(-r)") return exponential(-1.0);
    if (s.rfind("exp(", 0) == 0 && s.size() > 7 &&
        s.compare(s.size() - 3, 3, "*r)") == 0) {
      std::string num = s.substr(4, s.size() - 7);
      try {
        std::size_t pos = 0;
        double k = std::stod(num, &pos);
        if (pos == num.size()) return exponential(k);
      } catch (const std::exception&) {
      }
    }
    throw config_error("unrecognized valuation profile: " + s);
  }
};

namespace detail {

inline void check_valuation_at(const ValuationProfile& v, double r) {
  double qr = v.q(r);
  if (!(qr > 0.0)) throw validation_error("valuation q must be positive on the support");
  const double h = 1e-6;
  double fd = (v.q(r + h) - v.q(r - h)) / (2.0 * h);
  if (std::abs(fd - v.qprime(r)) > 1e-6 * (1.0 + std::abs(v.qprime(r))))
    throw validation_error("q' is inconsistent with q (finite-difference check)");
}

}  // namespace detail

inline void validate_valuation(const ValuationProfile& v, const TypeModel& tm,
                               std::size_t n_check = 17) {
  if (!v.q || !v.qprime) throw validation_error("valuation profile needs q and q'");
  for (std::size_t j = 0; j < n_check; ++j) {
    double r = tm.lo() + (tm.hi() - tm.lo()) * static_cast<double>(j) / (n_check - 1);
    detail::check_valuation_at(v, r);
  }
}

// Adjusted cutoff T(r) = g(r)/G(r) + q'(r)/q(r). Nonpositive values mean the
// type is excluded from the market; the bottom type keeps the +inf sentinel.
inline double valuation_cutoff(const TypeModel& tm, const ValuationProfile& v, double r) {
  if (!tm.contains(r)) throw validation_error("type outside the support");
  if (!v.q || !v.qprime) throw validation_error("valuation profile needs q and q'");
  detail::check_valuation_at(v, r);
  return virtual_preference(tm, r).T + v.qprime(r) / v.q(r);
}

struct ScdReport {
  bool holds = false;
  double margin = 0.0;     // T(r_hi) - max_r q'/q
  double max_slope = 0.0;  // max of q'/q over the grid
  double min_mixed = 0.0;  // smallest adjacent mixed difference of U
};

// Single-crossing check. The sufficient condition compares max q'/q with the
// hazard cutoff g/G at the top type. The audit evaluates the crossed utility
// U(r | r') = q(r) (1 - e^{-r T(r')}) / r on a grid, with T the adjusted
// cutoff clamped at zero, and records the smallest mixed difference; the menu
// sorts correctly when those are nonnegative.
inline ScdReport scd_check(const TypeModel& tm, const ValuationProfile& v,
                           std::size_t n_grid = 41) {
  validate_valuation(v, tm);
  if (n_grid < 3) throw validation_error("scd audit needs at least 3 grid points");

  ScdReport rep;
  rep.max_slope = -kInf;
  const double lo = tm.lo(), hi = tm.hi();
  Vec r(n_grid), cut(n_grid);
  for (std::size_t j = 0; j < n_grid; ++j) {
    r[j] = lo + (hi - lo) * static_cast<double>(j) / (n_grid - 1);
    rep.max_slope = std::max(rep.max_slope, v.qprime(r[j]) / v.q(r[j]));
    cut[j] = virtual_preference(tm, r[j]).T + v.qprime(r[j]) / v.q(r[j]);
  }
  double t_hi = virtual_preference(tm, hi).T;
  rep.margin = t_hi - rep.max_slope;
  rep.holds = rep.max_slope < t_hi;

  std::vector<Vec> U(n_grid, Vec(n_grid, 0.0));
  for (std::size_t i = 0; i < n_grid; ++i) {
    double qi = v.q(r[i]);
    for (std::size_t j = 0; j < n_grid; ++j) {
      double Tj = std::max(cut[j], 0.0);
      U[i][j] = qi * (1.0 - std::exp(-r[i] * Tj)) / r[i];
    }
  }
  rep.min_mixed = kInf;
  for (std::size_t i = 0; i + 1 < n_grid; ++i)
    for (std::size_t j = 0; j + 1 < n_grid; ++j) {
      double m = U[i + 1][j + 1] + U[i][j] - U[i + 1][j] - U[i][j + 1];
      rep.min_mixed = std::min(rep.min_mixed, m);
    }
  return rep;
}

// ----------------------------------------------------------------------------
// Endogenous reasoning quality.

// kappa at a gap y = T(r) - t from the cutoff:
//   kappa^alpha = alpha chi / ((alpha-1)(alpha+1)) y e^{-alpha r y}
//                 1F1(alpha+1, alpha+2, alpha r y),
// evaluated through the scaled Kummer function so large gaps cannot overflow.
// An infinite gap returns the plateau (chi/((alpha-1) r))^{1/alpha}.
inline double kappa_at_gap(double gap, double r, double alpha, double chi) {
  if (!(alpha > 1.0)) throw validation_error("quality curves need alpha > 1");
  if (!(chi > 0.0)) throw validation_error("quality curves need chi > 0");
  if (!(r > 0.0)) throw validation_error("quality curves need r > 0");
  if (gap < 0.0) throw validation_error("gap must be nonnegative");
  if (gap == kInf) return std::pow(chi / ((alpha - 1.0) * r), 1.0 / alpha);
  double z = alpha * r * gap;
  double coef = alpha * chi / ((alpha - 1.0) * (alpha + 1.0));
  double pw = coef * gap * detail::kummer_scaled(alpha + 1.0, alpha + 2.0, z);
  return std::pow(pw, 1.0 / alpha);
}

struct QualityCurve {
  double r = 0.0;
  double alpha = 2.0;
  double chi = 0.0;
  double T = 0.0;        // cutoff; kInf for the unbounded bottom type
  double plateau = 0.0;  // limit of kappa as the gap grows
  Vec t, kappa, upper, lower;
};

// The stopping boundaries 0.5 +- kappa(t) on [0, T(r)]. The bottom type has
// an infinite cutoff and a constant curve at the plateau, drawn over a finite
// window instead.
inline QualityCurve quality_curve(double r, const TypeModel& tm, double alpha, double chi,
                                  std::size_t n_points = 501, double window = 12.0) {
  if (!tm.contains(r)) throw validation_error("type outside the support");
  if (!(alpha > 1.0)) throw validation_error("quality curves need alpha > 1");
  if (!(chi > 0.0)) throw validation_error("quality curves need chi > 0");
  if (n_points < 2) throw validation_error("quality curve needs at least 2 grid points");
  double T = virtual_preference(tm, r).T;
  if (T <= 0.0) throw validation_error("type is excluded (nonpositive cutoff)");

  QualityCurve qc;
  qc.r = r;
  qc.alpha = alpha;
  qc.chi = chi;
  qc.T = T;
  qc.plateau = std::pow(chi / ((alpha - 1.0) * r), 1.0 / alpha);
  double span = (T == kInf) ? window : T;
  qc.t.resize(n_points);
  qc.kappa.resize(n_points);
  qc.upper.resize(n_points);
  qc.lower.resize(n_points);
  for (std::size_t j = 0; j < n_points; ++j) {
    double t = span * static_cast<double>(j) / (n_points - 1);
    double gap = (T == kInf) ? kInf : T - t;
    double k = kappa_at_gap(gap, r, alpha, chi);
    qc.t[j] = t;
    qc.kappa[j] = k;
    qc.upper[j] = std::clamp(0.5 + k, 0.0, 1.0);
    qc.lower[j] = std::clamp(0.5 - k, 0.0, 1.0);
  }
  return qc;
}

// ----------------------------------------------------------------------------
// Optimal menu under heterogeneous valuations.

// Same pipeline as build_menu with the cutoff from valuation_cutoff, gross
// terms scaled by q(r), and excluded types (cutoff <= 0) given the null item.
// With q = 1 every arithmetic step reduces to the homogeneous one, so the
// output matches build_menu bit for bit.
inline TokenMenu extended_menu(const TypeModel& tm, const ValuationProfile& v,
                               const StoppingLaw& law, double chi,
                               std::size_t n_types = 401) {
  if (law.chi <= 0.0)
    throw validation_error("menu construction needs a law with chi > 0");
  if (std::abs(chi - law.chi) > 1e-12)
    throw validation_error("chi disagrees with the law it was built from");
  if (n_types < 3) throw validation_error("menu needs at least 3 type grid points");
  validate_valuation(v, tm);
  ScdReport scd = scd_check(tm, v);
  if (!scd.holds)
    throw validation_error("single-crossing condition fails; the envelope menu is invalid");

  TokenMenu menu;
  menu.law = law;
  menu.chi = law.chi;
  menu.rows.resize(n_types);

  const double lo = tm.lo(), hi = tm.hi();
  for (std::size_t j = 0; j < n_types; ++j) {
    double r = lo + (hi - lo) * static_cast<double>(j) / (n_types - 1);
    MenuRow& row = menu.rows[j];
    row.r = r;
    double tv = virtual_preference(tm, r).T + v.qprime(r) / v.q(r);
    row.T = std::max(tv, 0.0);
    row.cap_tokens = (row.T == kInf) ? kInf : law.chi * row.T;
    row.utility = v.q(r) * PayoffPrefix(law, r, 1.0, 0.0).upto(row.T);
    row.marginal_price = (row.T == kInf || row.T <= 0.0)
                             ? 0.0
                             : v.q(r) * std::exp(-r * row.T) *
                                   density_at(law, row.T) / law.chi;
    if (j > 0 && row.T > menu.rows[j - 1].T + 1e-12)
      throw validation_error(
          "cutoff T(r) is not nonincreasing; ironing is not supported");
  }

  // rent density -u'(z) gains a -q'(z) gross term on top of the discounting
  // term; for excluded types both prefixes are empty and the rent is zero
  auto rent = [&](double z) {
    double tz = std::max(virtual_preference(tm, z).T + v.qprime(z) / v.q(z), 0.0);
    return v.q(z) * PayoffPrefix(law, z, 0.0, 1.0).upto(tz) -
           v.qprime(z) * PayoffPrefix(law, z, 1.0, 0.0).upto(tz);
  };
  menu.rows[n_types - 1].net_utility = 0.0;
  for (std::size_t j = n_types - 1; j > 0; --j) {
    double a = menu.rows[j - 1].r, b = menu.rows[j].r;
    double inc = adaptive_simpson(rent, a, b, 1e-12);
    menu.rows[j - 1].net_utility = menu.rows[j].net_utility + inc;
  }
  for (std::size_t j = 0; j < n_types; ++j) {
    menu.rows[j].price = menu.rows[j].utility - menu.rows[j].net_utility;
    if (j > 0 && menu.rows[j].price > menu.rows[j - 1].price + 1e-10)
      throw validation_error("menu prices are not nonincreasing in the type");
  }
  return menu;
}

}  // namespace tokenscreen

#endif
