#ifndef TOKENSCREEN_BASELINES_HPP
#define TOKENSCREEN_BASELINES_HPP

#include <cmath>
#include <functional>
#include <vector>

#include "entropy.hpp"
#include "quadrature.hpp"
#include "screening.hpp"

namespace tokenscreen {

inline double sech(double x) {
  x = std::abs(x);
  if (x > 700.0) return 0.0;
  return 2.0 / (std::exp(x) + std::exp(-x));
}

// A one-dimensional mechanism family: candidate allocations (the feasible
// set as a grid) with type utility U(a | r) and its type derivative.
struct ScreenFamily {
  Vec allocations;
  std::function<double(double, double)> utility;    // U(a | r)
  std::function<double(double, double)> utility_r;  // dU/dr at (a | r)
};

struct ScreenRow {
  double r = 0.0;
  bool served = false;
  double a = 0.0;
  double price = 0.0;
  double utility = 0.0;  // gross U(a* | r), zero when excluded
};

struct ScreenSolution {
  std::vector<ScreenRow> rows;
  double cutoff = 0.0;   // exclusion boundary (hi when everyone is served)
  double revenue = 0.0;  // virtual-surplus route
  double revenue_price_route = 0.0;
};

namespace detail {

struct PointwiseMax {
  double phi = 0.0;
  double a = 0.0;
};

// max over the allocation grid of the virtual value
// phi(a, r) = U(a|r) g(r) + G(r) U_r(a|r)
inline PointwiseMax best_allocation(const ScreenFamily& fam, const TypeModel& tm,
                                    double r) {
  double g = tm.pdf(r), G = tm.cdf(r);
  PointwiseMax best{-kInf, 0.0};
  for (double a : fam.allocations) {
    double phi = fam.utility(a, r) * g + G * fam.utility_r(a, r);
    if (phi > best.phi) best = {phi, a};
  }
  return best;
}

}  // namespace detail

// Pointwise virtual-surplus maximization over a one-dimensional family.
// Types whose virtual value is negative everywhere get the null allocation
// at price zero; the exclusion boundary is refined by bisection so revenue
// does not inherit type-grid error.
inline ScreenSolution screen_1d(const ScreenFamily& fam, const TypeModel& tm,
                                std::size_t n_types = 401) {
  if (fam.allocations.empty()) throw validation_error("empty allocation grid");
  if (n_types < 3) throw validation_error("need at least 3 type grid points");

  ScreenSolution sol;
  sol.rows.resize(n_types);
  const double lo = tm.lo(), hi = tm.hi();

  for (std::size_t j = 0; j < n_types; ++j) {
    double r = lo + (hi - lo) * static_cast<double>(j) / (n_types - 1);
    auto best = detail::best_allocation(fam, tm, r);
    ScreenRow& row = sol.rows[j];
    row.r = r;
    row.served = best.phi >= 0.0;
    row.a = row.served ? best.a : 0.0;
    row.utility = row.served ? fam.utility(best.a, r) : 0.0;
  }

  // the served set must be a lower interval and the allocation monotone
  std::size_t first_out = n_types;
  for (std::size_t j = 0; j < n_types; ++j) {
    if (!sol.rows[j].served) {
      first_out = j;
      break;
    }
  }
  for (std::size_t j = first_out; j < n_types; ++j)
    if (sol.rows[j].served)
      throw validation_error("served types do not form a lower interval; ironing unsupported");
  if (first_out == 0) {
    sol.cutoff = lo;
    return sol;
  }
  bool down = true, up = true;
  for (std::size_t j = 1; j < first_out; ++j) {
    down = down && sol.rows[j].a <= sol.rows[j - 1].a + 1e-12;
    up = up && sol.rows[j].a >= sol.rows[j - 1].a - 1e-12;
  }
  if (!down && !up)
    throw validation_error("allocation is not monotone in the type; ironing unsupported");

  // exact exclusion boundary
  if (first_out == n_types) {
    sol.cutoff = hi;
  } else {
    double a = sol.rows[first_out - 1].r, b = sol.rows[first_out].r;
    while (b - a > 1e-12) {
      double m = 0.5 * (a + b);
      (detail::best_allocation(fam, tm, m).phi >= 0.0 ? a : b) = m;
    }
    sol.cutoff = 0.5 * (a + b);
  }

  // envelope prices accumulated downward from the boundary type
  auto rent_rate = [&](double z) {
    auto best = detail::best_allocation(fam, tm, z);
    return -fam.utility_r(best.a, z);
  };
  double W = 0.0;
  double upper = sol.cutoff;
  for (std::size_t j = first_out; j-- > 0;) {
    W += adaptive_simpson(rent_rate, sol.rows[j].r, upper, 1e-12);
    sol.rows[j].price = sol.rows[j].utility - W;
    upper = sol.rows[j].r;
  }

  // revenue, twice: pointwise virtual surplus (exact for the continuum) and
  // the priced menu integrated against the type density
  sol.revenue = adaptive_simpson(
      [&](double z) { return std::max(0.0, detail::best_allocation(fam, tm, z).phi); },
      lo, sol.cutoff, 1e-11);
  for (std::size_t j = 1; j < first_out; ++j) {
    const auto& p = sol.rows[j - 1];
    const auto& q = sol.rows[j];
    sol.revenue_price_route += 0.5 * (p.price * tm.pdf(p.r) + q.price * tm.pdf(q.r)) *
                               (q.r - p.r);
  }
  if (first_out < n_types) {
    // stub between the last served grid point and the exact boundary
    const auto& p = sol.rows[first_out - 1];
    double pc = detail::best_allocation(fam, tm, sol.cutoff).a;
    double price_c = fam.utility(pc, sol.cutoff);
    sol.revenue_price_route += 0.5 * (p.price * tm.pdf(p.r) + price_c * tm.pdf(sol.cutoff)) *
                               (sol.cutoff - p.r);
  }
  return sol;
}

// ----------------------------------------------------------------------------
// Constant-delay family: reveal the state at a deterministic delay t.

struct ConstantDelaySolution {
  double t_min = 0.0;
  ScreenSolution screen;

  double revenue() const { return screen.revenue; }
};

inline ConstantDelaySolution constant_delay_solution(const TypeModel& tm,
                                                     const EntropyModel& entropy,
                                                     const Belief& mu0, double chi) {
  if (chi <= 0.0) throw validation_error("capacity must be positive");
  double budget = -entropy.value(mu0.probs());
  for (std::size_t i = 0; i < mu0.size(); ++i)
    budget += mu0[i] * entropy.vertex_value(mu0.size(), i);

  ConstantDelaySolution out;
  out.t_min = budget / chi;

  ScreenFamily fam;
  const int n_alloc = 1001;
  for (int k = 0; k < n_alloc; ++k)
    fam.allocations.push_back(out.t_min + 10.0 * k / (n_alloc - 1));
  fam.utility = [](double t, double r) { return std::exp(-r * t); };
  fam.utility_r = [](double t, double r) { return -t * std::exp(-r * t); };
  out.screen = screen_1d(fam, tm);
  return out;
}

// ----------------------------------------------------------------------------
// Diffusion family: drift-signal models indexed by signal-to-noise sigma,
// quadratic variation capped at chi_qv.

struct DiffusionSolution {
  double sigma_cap = 0.0;
  ScreenSolution screen;

  double revenue() const { return screen.revenue; }
};

inline DiffusionSolution diffusion_solution(const TypeModel& tm, double chi_qv) {
  if (chi_qv <= 0.0) throw validation_error("quadratic variation cap must be positive");
  DiffusionSolution out;
  out.sigma_cap = std::sqrt(chi_qv);

  ScreenFamily fam;
  const int n_alloc = 1000;
  for (int k = 1; k <= n_alloc; ++k)
    fam.allocations.push_back(out.sigma_cap * k / n_alloc);
  fam.utility = [](double s, double r) { return sech(std::sqrt(0.5 * r) / s); };
  fam.utility_r = [](double s, double r) {
    double x = std::sqrt(0.5 * r) / s;
    double sh = sech(x);
    return -sh * std::tanh(x) * x / (2.0 * r);
  };
  out.screen = screen_1d(fam, tm);
  return out;
}

}  // namespace tokenscreen

#endif
