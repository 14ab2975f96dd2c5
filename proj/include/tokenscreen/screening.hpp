#ifndef TOKENSCREEN_SCREENING_HPP
#define TOKENSCREEN_SCREENING_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "quadrature.hpp"
#include "stopping.hpp"

namespace tokenscreen {

// Distribution of the per-unit-time discount rate r over [lo, hi],
// 0 < lo < hi. Either the built-in uniform family or a tabulated CDF
// interpolated with a monotone cubic.
class TypeModel {
 public:
  enum class Kind { kUniform, kTabulated };

  static TypeModel uniform(double a, double b) {
    if (!(0.0 < a && a < b))
      throw validation_error("uniform type support requires 0 < a < b");
    TypeModel tm;
    tm.kind_ = Kind::kUniform;
    tm.lo_ = a;
    tm.hi_ = b;
    return tm;
  }

  static TypeModel tabulated(Vec r, Vec cdf) {
    if (r.size() != cdf.size() || r.size() < 2)
      throw validation_error("tabulated types need matching r/cdf arrays of size >= 2");
    if (r.front() <= 0.0) throw validation_error("type support must be positive");
    for (std::size_t k = 1; k < r.size(); ++k) {
      if (r[k] <= r[k - 1]) throw validation_error("tabulated r grid must be strictly increasing");
      if (cdf[k] < cdf[k - 1]) throw validation_error("tabulated cdf must be nondecreasing");
    }
    if (std::abs(cdf.front()) > 1e-12 || std::abs(cdf.back() - 1.0) > 1e-12)
      throw validation_error("tabulated cdf must run from 0 to 1");
    TypeModel tm;
    tm.kind_ = Kind::kTabulated;
    tm.lo_ = r.front();
    tm.hi_ = r.back();
    tm.xs_ = std::move(r);
    tm.Gs_ = std::move(cdf);
    tm.ms_ = pchip_slopes(tm.xs_, tm.Gs_);
    return tm;
  }

  Kind kind() const { return kind_; }
  double lo() const { return lo_; }
  double hi() const { return hi_; }
  bool contains(double r) const { return r >= lo_ - 1e-12 && r <= hi_ + 1e-12; }

  double cdf(double r) const {
    if (kind_ == Kind::kUniform)
      return std::clamp((r - lo_) / (hi_ - lo_), 0.0, 1.0);
    if (r <= lo_) return 0.0;
    if (r >= hi_) return 1.0;
    std::size_t j = seg(r);
    double h = xs_[j + 1] - xs_[j], t = (r - xs_[j]) / h;
    double t2 = t * t, t3 = t2 * t;
    return Gs_[j] * (2 * t3 - 3 * t2 + 1) + h * ms_[j] * (t3 - 2 * t2 + t) +
           Gs_[j + 1] * (-2 * t3 + 3 * t2) + h * ms_[j + 1] * (t3 - t2);
  }

  // density, floored away from zero so g/G ratios stay finite
  double pdf(double r) const {
    double g;
    if (kind_ == Kind::kUniform) {
      g = (r >= lo_ - 1e-12 && r <= hi_ + 1e-12) ? 1.0 / (hi_ - lo_) : 0.0;
    } else {
      double rc = std::clamp(r, lo_, hi_);
      std::size_t j = seg(rc);
      double h = xs_[j + 1] - xs_[j], t = (rc - xs_[j]) / h;
      double t2 = t * t;
      g = (6 * t2 - 6 * t) * (Gs_[j] - Gs_[j + 1]) / h + ms_[j] * (3 * t2 - 4 * t + 1) +
          ms_[j + 1] * (3 * t2 - 2 * t);
    }
    if (g < 1e-12) {
      floored_ = true;
      return 1e-12;
    }
    return g;
  }

  bool density_floored() const { return floored_; }

 private:
  static Vec pchip_slopes(const Vec& x, const Vec& y) {
    const std::size_t n = x.size();
    Vec h(n - 1), d(n - 1), m(n, 0.0);
    for (std::size_t k = 0; k + 1 < n; ++k) {
      h[k] = x[k + 1] - x[k];
      d[k] = (y[k + 1] - y[k]) / h[k];
    }
    if (n == 2) {
      m[0] = m[1] = d[0];
      return m;
    }
    for (std::size_t k = 1; k + 1 < n; ++k) {
      if (d[k - 1] * d[k] <= 0.0) {
        m[k] = 0.0;
      } else {
        double w1 = 2.0 * h[k] + h[k - 1], w2 = h[k] + 2.0 * h[k - 1];
        m[k] = (w1 + w2) / (w1 / d[k - 1] + w2 / d[k]);
      }
    }
    auto endpoint = [](double h0, double h1, double d0, double d1) {
      double s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
      if (s * d0 <= 0.0) return 0.0;
      if (d0 * d1 < 0.0 && std::abs(s) > 3.0 * std::abs(d0)) return 3.0 * d0;
      return s;
    };
    m[0] = endpoint(h[0], h[1], d[0], d[1]);
    m[n - 1] = endpoint(h[n - 2], h[n - 3], d[n - 2], d[n - 3]);
    return m;
  }

  std::size_t seg(double r) const {
    auto it = std::upper_bound(xs_.begin(), xs_.end(), r);
    std::size_t j = (it == xs_.begin()) ? 0 : static_cast<std::size_t>(it - xs_.begin()) - 1;
    return std::min(j, xs_.size() - 2);
  }

  Kind kind_ = Kind::kUniform;
  double lo_ = 1.0, hi_ = 2.0;
  Vec xs_, Gs_, ms_;
  mutable bool floored_ = false;
};

// Virtual time preference rho_r(t) = e^{-rt} (1 - t G(r)/g(r)). Its unique
// root T(r) = g(r)/G(r) is the revenue-optimal cutoff for type r; the bottom
// type gets the +inf sentinel (unlimited tier).
struct VirtualPreference {
  double r = 0.0;
  double ratio = 0.0;  // G(r)/g(r)
  double T = kInf;

  double value(double t) const { return std::exp(-r * t) * (1.0 - t * ratio); }
  double positive_part(double t) const { return std::max(0.0, value(t)); }
};

inline VirtualPreference virtual_preference(const TypeModel& tm, double r) {
  if (!tm.contains(r)) throw validation_error("type outside the support");
  VirtualPreference vp;
  vp.r = r;
  double G = tm.cdf(r), g = tm.pdf(r);
  vp.ratio = G / g;
  vp.T = (G <= 0.0) ? kInf : g / G;
  return vp;
}

inline double token_cap(const TypeModel& tm, double chi, double r) {
  double T = virtual_preference(tm, r).T;
  return (T == kInf) ? kInf : chi * T;
}

namespace detail {

// int_0^{T(z)} t e^{-zt} dF(t), the information-rent density at type z
inline double rent_density(const StoppingLaw& law, const TypeModel& tm, double z) {
  return PayoffPrefix(law, z, 0.0, 1.0).upto(virtual_preference(tm, z).T);
}

}  // namespace detail

// Gross utility of type r under its own cutoff.
inline double gross_utility(const StoppingLaw& law, const TypeModel& tm, double r) {
  return PayoffPrefix(law, r, 1.0, 0.0).upto(virtual_preference(tm, r).T);
}

// U(reported | r): expected e^{-r tau} when consuming the cap of the
// reported type.
inline double user_utility(const StoppingLaw& law, double r, double reported,
                           const TypeModel& tm) {
  if (!tm.contains(r) || !tm.contains(reported))
    throw validation_error("type outside the support");
  return PayoffPrefix(law, r, 1.0, 0.0).upto(virtual_preference(tm, reported).T);
}

// Envelope price: gross utility minus the information rent
// int_r^{hi} rent_density(z) dz, so the top type is priced to zero rent.
inline double price(const TypeModel& tm, const StoppingLaw& law, double r) {
  if (!tm.contains(r)) throw validation_error("type outside the support");
  double rent = (r < tm.hi())
                    ? adaptive_simpson(
                          [&](double z) { return detail::rent_density(law, tm, z); }, r,
                          tm.hi(), 1e-10)
                    : 0.0;
  return gross_utility(law, tm, r) - rent;
}

inline double marginal_price(const TypeModel& tm, const StoppingLaw& law, double r) {
  if (law.chi <= 0.0) throw validation_error("marginal price needs a law with chi > 0");
  double T = virtual_preference(tm, r).T;
  if (T == kInf) return 0.0;
  return std::exp(-r * T) * density_at(law, T) / law.chi;
}

struct MenuRow {
  double r = 0.0;
  double T = 0.0;
  double cap_tokens = 0.0;
  double price = 0.0;
  double marginal_price = 0.0;
  double utility = 0.0;      // gross expected payoff at the own cutoff
  double net_utility = 0.0;  // information rent left to the type
};

struct TokenMenu {
  std::vector<MenuRow> rows;
  StoppingLaw law;
  double chi = 0.0;
};

// The full menu on a uniform type grid. Prices come from one continuous
// envelope accumulated from the top type down, so incentive gaps measured on
// the grid reflect the continuous screening problem rather than grid error.
inline TokenMenu build_menu(const StoppingLaw& law, const TypeModel& tm,
                            std::size_t n_types = 401) {
  if (law.chi <= 0.0)
    throw validation_error("menu construction needs a law with chi > 0");
  if (n_types < 3) throw validation_error("menu needs at least 3 type grid points");

  TokenMenu menu;
  menu.law = law;
  menu.chi = law.chi;
  menu.rows.resize(n_types);

  const double lo = tm.lo(), hi = tm.hi();
  for (std::size_t j = 0; j < n_types; ++j) {
    double r = lo + (hi - lo) * static_cast<double>(j) / (n_types - 1);
    MenuRow& row = menu.rows[j];
    row.r = r;
    row.T = virtual_preference(tm, r).T;
    row.cap_tokens = (row.T == kInf) ? kInf : law.chi * row.T;
    row.utility = gross_utility(law, tm, r);
    row.marginal_price = marginal_price(tm, law, r);
    if (j > 0 && row.T > menu.rows[j - 1].T + 1e-12)
      throw validation_error(
          "cutoff T(r) is not nonincreasing; ironing is not supported");
  }

  // envelope from the top down
  menu.rows[n_types - 1].net_utility = 0.0;
  for (std::size_t j = n_types - 1; j > 0; --j) {
    double a = menu.rows[j - 1].r, b = menu.rows[j].r;
    double inc = adaptive_simpson(
        [&](double z) { return detail::rent_density(law, tm, z); }, a, b, 1e-12);
    menu.rows[j - 1].net_utility = menu.rows[j].net_utility + inc;
  }
  for (std::size_t j = 0; j < n_types; ++j) {
    menu.rows[j].price = menu.rows[j].utility - menu.rows[j].net_utility;
    if (j > 0 && menu.rows[j].price > menu.rows[j - 1].price + 1e-10)
      throw validation_error("menu prices are not nonincreasing in the type");
  }
  return menu;
}

struct RevenueRoutes {
  double price_route = 0.0;    // integral of P(r) g(r)
  double virtual_route = 0.0;  // integral of the virtual surplus
};

// Two independent computations of expected revenue; they agree by the
// envelope/Fubini identity and the match is asserted in tests.
inline RevenueRoutes menu_revenue_routes(const TokenMenu& menu, const TypeModel& tm) {
  const auto& rows = menu.rows;
  const std::size_t n = rows.size();
  RevenueRoutes out;
  auto simpson_add = [&](auto value, double& acc) {
    for (std::size_t j = 0; j + 2 < n; j += 2) {
      double h = rows[j + 1].r - rows[j].r;
      acc += h / 3.0 * (value(j) + 4.0 * value(j + 1) + value(j + 2));
    }
    if (n % 2 == 0) {  // leftover interval for even point counts
      double h = rows[n - 1].r - rows[n - 2].r;
      acc += 0.5 * h * (value(n - 2) + value(n - 1));
    }
  };
  simpson_add([&](std::size_t j) { return rows[j].price * tm.pdf(rows[j].r); },
              out.price_route);
  simpson_add(
      [&](std::size_t j) {
        double r = rows[j].r;
        return rows[j].utility * tm.pdf(r) -
               tm.cdf(r) * detail::rent_density(menu.law, tm, r);
      },
      out.virtual_route);
  return out;
}

inline double menu_revenue(const TokenMenu& menu, const TypeModel& tm) {
  return menu_revenue_routes(menu, tm).price_route;
}

}  // namespace tokenscreen

#endif
