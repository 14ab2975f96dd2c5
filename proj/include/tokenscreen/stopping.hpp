#ifndef TOKENSCREEN_STOPPING_HPP
#define TOKENSCREEN_STOPPING_HPP

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <vector>

#include "quadrature.hpp"
#include "skeleton.hpp"

namespace tokenscreen {

// Analytic exponential tail of a stopping law: for t >= t0 the per-state
// remaining mass is survival0 * weights_i * exp(-hazard (t - t0)). t_end
// marks a truncation of the tail (inf when untruncated).
struct Tail {
  double t0 = 0.0;
  double survival0 = 1.0;
  double hazard = 0.0;
  Vec weights;
  double t_end = kInf;
};

struct Atom {
  double t = 0.0;
  Vec mass;
};

// Per-state sub-CDFs on a grid plus an analytic tail; the complete
// reduced-form description of a stopping rule. F^i(inf) + never_mass_i
// equals the prior mass mu0(i).
struct StoppingLaw {
  Vec grid;                    // strictly increasing, grid[0] = 0
  std::vector<Vec> Fi;         // continuous part at grid points (atoms excluded)
  Vec f;                       // total density at grid points
  Vec cumI;                    // integral of (1 - F) up to each grid point
  std::optional<Tail> tail;
  std::vector<Atom> atoms;
  Vec never_mass;              // mass that never learns (truncated laws)
  Vec mu0;
  double chi = 0.0;            // capacity of the generating process, if any
  double horizon = 0.0;

  std::size_t n() const { return mu0.size(); }
};

namespace detail {

inline double interp(const Vec& xs, const Vec& ys, double x) {
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return ys.front();
  if (it == xs.end()) return ys.back();
  std::size_t j = static_cast<std::size_t>(it - xs.begin());
  double w = (x - xs[j - 1]) / (xs[j] - xs[j - 1]);
  return ys[j - 1] * (1.0 - w) + ys[j] * w;
}

inline std::size_t grid_index_below(const Vec& xs, double x) {
  auto it = std::upper_bound(xs.begin(), xs.end(), x);
  if (it == xs.begin()) return 0;
  return static_cast<std::size_t>(it - xs.begin()) - 1;
}

}  // namespace detail

// Continuous-plus-tail part of F^i at time t (atoms handled separately).
inline double Fi_continuous_at(const StoppingLaw& law, std::size_t i, double t) {
  if (t <= 0.0) return 0.0;
  if (law.tail && t >= law.tail->t0) {
    // remaining continuous mass at te is survival0 * w_i * exp(-hazard (te - t0))
    // and freezes at t_end, which is exactly where tail never-mass comes from
    const Tail& tl = *law.tail;
    double te = std::min(t, tl.t_end);
    double rem = tl.survival0 * tl.weights[i] * std::exp(-tl.hazard * (te - tl.t0));
    return law.mu0[i] - rem;
  }
  if (t >= law.grid.back()) {
    return law.Fi.back()[i];
  }
  std::size_t j = detail::grid_index_below(law.grid, t);
  double w = (t - law.grid[j]) / (law.grid[j + 1] - law.grid[j]);
  return law.Fi[j][i] * (1.0 - w) + law.Fi[j + 1][i] * w;
}

inline double Fi_at(const StoppingLaw& law, std::size_t i, double t) {
  double v = Fi_continuous_at(law, i, t);
  for (const Atom& a : law.atoms)
    if (a.t <= t) v += a.mass[i];
  return v;
}

inline double F_at(const StoppingLaw& law, double t) {
  double v = 0.0;
  for (std::size_t i = 0; i < law.n(); ++i) v += Fi_at(law, i, t);
  return v;
}

// Learned mass at infinity per state (excludes never-learn mass).
inline double Fi_total(const StoppingLaw& law, std::size_t i) {
  return Fi_at(law, i, kInf);
}

// Total stopping density at t (analytic on the tail, zero past a truncation).
inline double density_at(const StoppingLaw& law, double t) {
  if (t < 0.0) return 0.0;
  if (law.tail && t >= law.tail->t0) {
    const Tail& tl = *law.tail;
    if (t > tl.t_end) return 0.0;
    return tl.survival0 * tl.hazard * std::exp(-tl.hazard * (t - tl.t0));
  }
  if (t > law.grid.back()) return 0.0;
  return detail::interp(law.grid, law.f, t);
}

// ----------------------------------------------------------------------------
// Construction from a greedy skeleton.

struct LawOpts {
  double grid_step = 1e-3;    // uniform step before the stationary onset
  // dense enough that trapezoids of f reproduce F within 1e-6 over the
  // default 20-lifetime horizon
  int tail_grid_points = 8000;
};

inline StoppingLaw stopping_law(const GreedySkeleton& sk,
                                double horizon = -1.0,
                                const LawOpts& opts = {}) {
  const std::size_t n = sk.n();
  if (horizon < 0.0) horizon = sk.t_hat_K + 20.0 / sk.stat.hazard;
  if (horizon < sk.t_hat_K)
    throw validation_error("law horizon must reach the stationary onset");

  StoppingLaw law;
  law.mu0 = sk.mu0;
  law.chi = sk.chi;
  law.horizon = horizon;
  law.never_mass.assign(n, 0.0);

  law.grid.push_back(0.0);
  law.Fi.push_back(Vec(n, 0.0));
  law.cumI.push_back(0.0);

  double logS = 0.0;
  Vec F(n, 0.0);
  double cum = 0.0;

  // integrate d(logS) = -R dt, dF_i = beta_i e^{logS} dt, dcum = e^{logS} dt
  // phase by phase with classical RK4 so every field evaluation stays on the
  // correct side of a rate discontinuity.
  double f_prev = sum(rates_at(sk, 0.0));  // density at t=0 (f = R S, S = 1)
  law.f.push_back(f_prev);

  for (const Phase& ph : sk.phases) {
    double a = ph.t_start, b = ph.t_end;
    int steps = std::max(1, static_cast<int>(std::ceil((b - a) / opts.grid_step - 1e-12)));
    double h = (b - a) / steps;
    for (int s = 0; s < steps; ++s) {
      double t0 = a + s * h;
      double t1 = (s + 1 == steps) ? b : t0 + h;
      auto field = [&](double t, double lS) {
        Vec beta = rates_in_phase(sk, ph, t);
        double R = sum(beta);
        double S = std::exp(lS);
        return std::tuple<double, Vec, double>(-R, beta, S);
      };
      // RK4 on (logS, F, cum)
      auto [dl1, b1, S1] = field(t0, logS);
      double hh = t1 - t0;
      auto [dl2, b2, S2] = field(t0 + 0.5 * hh, logS + 0.5 * hh * dl1);
      auto [dl3, b3, S3] = field(t0 + 0.5 * hh, logS + 0.5 * hh * dl2);
      auto [dl4, b4, S4] = field(t1, logS + hh * dl3);
      logS += (hh / 6.0) * (dl1 + 2 * dl2 + 2 * dl3 + dl4);
      for (std::size_t i = 0; i < n; ++i)
        F[i] += (hh / 6.0) * (b1[i] * S1 + 2 * b2[i] * S2 + 2 * b3[i] * S3 + b4[i] * S4);
      cum += (hh / 6.0) * (S1 + 2 * S2 + 2 * S3 + S4);
      law.grid.push_back(t1);
      law.Fi.push_back(F);
      law.cumI.push_back(cum);
      double R_end = sum(rates_in_phase(sk, ph, t1));
      law.f.push_back(R_end * std::exp(logS));
    }
  }

  // attach the analytic tail; weights renormalized from the integrated
  // remaining mass so total mass closes exactly
  Tail tl;
  tl.t0 = sk.t_hat_K;
  Vec rem(n);
  double S0 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    rem[i] = sk.mu0[i] - F[i];
    S0 += rem[i];
  }
  tl.survival0 = S0;
  tl.hazard = sk.stat.hazard;
  tl.weights.resize(n);
  for (std::size_t i = 0; i < n; ++i) tl.weights[i] = rem[i] / S0;
  law.tail = tl;

  // display/audit grid across the tail region (values are analytic)
  if (horizon > sk.t_hat_K && opts.tail_grid_points > 0) {
    double dt = (horizon - sk.t_hat_K) / opts.tail_grid_points;
    for (int k = 1; k <= opts.tail_grid_points; ++k) {
      double t = sk.t_hat_K + k * dt;
      double decay = std::exp(-tl.hazard * (t - tl.t0));
      Vec Ft(n);
      for (std::size_t i = 0; i < n; ++i) Ft[i] = sk.mu0[i] - S0 * tl.weights[i] * decay;
      law.grid.push_back(t);
      law.Fi.push_back(Ft);
      law.f.push_back(S0 * tl.hazard * decay);
      law.cumI.push_back(cum + S0 * (1.0 - decay) / tl.hazard);
    }
  }
  return law;
}

// Everyone learns at the fixed delay t: a single atom carrying the prior.
inline StoppingLaw constant_delay_law(const Belief& mu0, double t, double horizon = -1.0) {
  if (t < 0.0) throw validation_error("constant delay must be nonnegative");
  const std::size_t n = mu0.size();
  StoppingLaw law;
  law.mu0 = mu0.probs();
  law.horizon = (horizon > t) ? horizon : t + 1.0;
  law.never_mass.assign(n, 0.0);
  law.grid = Vec{0.0, law.horizon};
  law.Fi = {Vec(n, 0.0), Vec(n, 0.0)};
  law.f = Vec{0.0, 0.0};
  law.atoms.push_back(Atom{t, law.mu0});
  return law;
}

// ----------------------------------------------------------------------------
// Capacity functional audit.

struct CapacityAudit {
  Vec times;
  Vec lhs;    // realized entropy production
  Vec rhs;    // chi * integral of (1 - F)
  Vec slack;  // rhs - lhs
  double min_slack = kInf;
  double argmin_time = 0.0;
  bool feasible = false;
};

inline CapacityAudit capacity_audit(const StoppingLaw& law, const EntropyModel& entropy,
                                    const Belief& mu0, double chi, double eps_cap = 1e-7) {
  const std::size_t n = mu0.size();
  for (std::size_t i = 0; i < n; ++i) {
    double closure = Fi_total(law, i) + law.never_mass[i];
    if (std::abs(closure - mu0[i]) > 1e-8)
      throw validation_error("stopping law is mass-incomplete in state " + std::to_string(i));
  }

  Vec times = law.grid;
  for (const Atom& a : law.atoms) times.push_back(a.t);
  if (law.tail && law.tail->t_end < law.horizon) times.push_back(law.tail->t_end);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [](double x, double y) { return std::abs(x - y) < 1e-15; }),
              times.end());

  Vec He(n);
  for (std::size_t i = 0; i < n; ++i) He[i] = entropy.vertex_value(n, i);
  double Hmu0 = entropy.value(mu0.probs());

  CapacityAudit audit;
  audit.times = times;
  bool have_cum = law.cumI.size() == law.grid.size() && !law.cumI.empty() && law.atoms.empty();

  double cum = 0.0;
  double prev_t = 0.0;
  double prev_one_minus_F_right = 1.0 - F_at(law, 0.0);
  for (std::size_t k = 0; k < times.size(); ++k) {
    double t = times[k];
    // integral of (1 - F) up to t
    double atom_jump = 0.0;
    for (const Atom& a : law.atoms)
      if (std::abs(a.t - t) < 1e-15) atom_jump += sum(a.mass);
    double Ft = F_at(law, t);
    double one_minus_left = 1.0 - (Ft - atom_jump);
    if (have_cum && law.tail && t >= law.tail->t0 - 1e-15) {
      const Tail& tl = *law.tail;
      std::size_t j0 = detail::grid_index_below(law.grid, std::min(t, tl.t0));
      double base = law.cumI[j0];  // exact up to t0 (grid contains t0)
      // recompute analytically past t0 (covers also t beyond the display grid)
      double te = std::min(t, tl.t_end);
      double tail_part = tl.survival0 * (1.0 - std::exp(-tl.hazard * (te - tl.t0))) / tl.hazard;
      double flat_part = (t > tl.t_end && tl.t_end < kInf)
                             ? (t - tl.t_end) * (1.0 - F_at(law, tl.t_end))
                             : 0.0;
      std::size_t jt0 = detail::grid_index_below(law.grid, tl.t0);
      cum = law.cumI[jt0] + tail_part + flat_part;
      (void)base;
    } else if (have_cum && t <= law.grid.back() + 1e-15 &&
               std::abs(t - law.grid[detail::grid_index_below(law.grid, t)]) < 1e-15) {
      cum = law.cumI[detail::grid_index_below(law.grid, t)];
    } else {
      cum += 0.5 * (prev_one_minus_F_right + one_minus_left) * (t - prev_t);
    }
    prev_t = t;
    prev_one_minus_F_right = 1.0 - Ft;

    double lhs = -Hmu0;
    Vec remaining(n);
    double rem_total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double Fit = Fi_at(law, i, t);
      lhs += Fit * He[i];
      remaining[i] = std::max(0.0, mu0[i] - Fit);
      rem_total += remaining[i];
    }
    lhs += (rem_total > 1e-14) ? entropy.value(remaining) : 0.0;
    double rhs = chi * cum;

    audit.lhs.push_back(lhs);
    audit.rhs.push_back(rhs);
    audit.slack.push_back(rhs - lhs);
    if (rhs - lhs < audit.min_slack) {
      audit.min_slack = rhs - lhs;
      audit.argmin_time = t;
    }
  }
  audit.feasible = audit.min_slack >= -eps_cap;
  return audit;
}

// ----------------------------------------------------------------------------
// Truncation at a token cap chi * T.

inline StoppingLaw truncate_law(const StoppingLaw& law, double T) {
  const std::size_t n = law.n();
  if (T >= law.horizon || T == kInf) return law;
  if (T < 0.0) throw validation_error("truncation time must be nonnegative");

  StoppingLaw out;
  out.mu0 = law.mu0;
  out.chi = law.chi;
  out.horizon = T;
  if (T == 0.0) {
    out.grid = Vec{0.0};
    out.Fi = {Vec(n, 0.0)};
    out.f = Vec{0.0};
    out.cumI = Vec{0.0};
    out.never_mass = law.mu0;
    return out;
  }

  for (std::size_t j = 0; j < law.grid.size() && law.grid[j] < T; ++j) {
    out.grid.push_back(law.grid[j]);
    out.Fi.push_back(law.Fi[j]);
    out.f.push_back(law.f[j]);
    if (j < law.cumI.size()) out.cumI.push_back(law.cumI[j]);
  }
  // exact endpoint
  Vec FT(n);
  for (std::size_t i = 0; i < n; ++i) FT[i] = Fi_continuous_at(law, i, T);
  out.grid.push_back(T);
  out.Fi.push_back(FT);
  out.f.push_back(density_at(law, T));
  if (!out.cumI.empty()) {
    double prev = out.grid[out.grid.size() - 2];
    double Fprev = 0.0, Fnow = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      Fprev += out.Fi[out.Fi.size() - 2][i];
      Fnow += FT[i];
    }
    out.cumI.push_back(out.cumI.back() + 0.5 * ((1 - Fprev) + (1 - Fnow)) * (T - prev));
  }

  if (law.tail && T > law.tail->t0) {
    Tail tl = *law.tail;
    tl.t_end = T;
    out.tail = tl;
  }
  for (const Atom& a : law.atoms)
    if (a.t <= T) out.atoms.push_back(a);

  out.never_mass.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double learned = Fi_continuous_at(out, i, T);
    for (const Atom& a : out.atoms) learned += a.mass[i];
    out.never_mass[i] = std::max(0.0, law.mu0[i] - law.never_mass[i] - learned) + law.never_mass[i];
  }
  return out;
}

// ----------------------------------------------------------------------------
// Expected payoff under a stopping law.

// Payoff of stopping at time t. Exponential-polynomial payoffs
// (c0 + c1 t) e^{-rt} carry closed-form tail kernels.
struct Payoff {
  std::function<double(double)> fn;
  bool exp_poly = false;
  double r = 0.0, c0 = 0.0, c1 = 0.0;

  static Payoff exponential(double r) { return exp_poly_payoff(r, 1.0, 0.0); }

  static Payoff exp_poly_payoff(double r, double c0, double c1) {
    Payoff p;
    p.exp_poly = true;
    p.r = r;
    p.c0 = c0;
    p.c1 = c1;
    p.fn = [r, c0, c1](double t) { return (c0 + c1 * t) * std::exp(-r * t); };
    return p;
  }

  static Payoff generic(std::function<double(double)> f) {
    Payoff p;
    p.fn = std::move(f);
    return p;
  }
};

namespace detail {

// integral of (c0 + c1 t) e^{-rt} hazard-weighted over the tail: the tail
// density is survival0 * hazard * exp(-hazard (t - t0)) on [t0, te].
inline double tail_exp_poly_integral(const Tail& tl, double r, double c0, double c1,
                                     double te) {
  te = std::min(te, tl.t_end);
  if (te <= tl.t0) return 0.0;
  double a = r + tl.hazard;
  double L = te - tl.t0;
  double e0, e1;  // int_0^L e^{-as} ds and int_0^L s e^{-as} ds
  if (a * L > 700.0) {
    e0 = 1.0 / a;
    e1 = 1.0 / (a * a);
  } else {
    double ex = std::exp(-a * L);
    e0 = (1.0 - ex) / a;
    e1 = (1.0 - (1.0 + a * L) * ex) / (a * a);
  }
  double amp = tl.survival0 * tl.hazard * std::exp(-r * tl.t0);
  return amp * ((c0 + c1 * tl.t0) * e0 + c1 * e1);
}

}  // namespace detail

// E[ rho(tau) ], with never-learn mass contributing zero.
inline double expected_payoff(const StoppingLaw& law, const Payoff& rho) {
  double total = 0.0;
  // continuous pre-tail part by trapezoid of rho * f on the grid
  double upto = law.tail ? law.tail->t0 : law.grid.back();
  for (std::size_t j = 0; j + 1 < law.grid.size() && law.grid[j] < upto - 1e-15; ++j) {
    double a = law.grid[j], b = law.grid[j + 1];
    total += 0.5 * (rho.fn(a) * law.f[j] + rho.fn(b) * law.f[j + 1]) * (b - a);
  }
  if (law.tail) {
    const Tail& tl = *law.tail;
    if (rho.exp_poly) {
      total += detail::tail_exp_poly_integral(tl, rho.r, rho.c0, rho.c1, kInf);
    } else {
      double span = (tl.t_end < kInf) ? tl.t_end - tl.t0 : 60.0 / tl.hazard;
      auto g = [&](double t) {
        return rho.fn(t) * tl.survival0 * tl.hazard * std::exp(-tl.hazard * (t - tl.t0));
      };
      total += adaptive_simpson(g, tl.t0, tl.t0 + span, 1e-10);
    }
  }
  for (const Atom& a : law.atoms) total += rho.fn(a.t) * sum(a.mass);
  return total;
}

// Prefix evaluator for integrals int_0^T (c0 + c1 t) e^{-rt} dF(t): one
// O(grid) precomputation, then O(log) per cutoff. The workhorse behind menu
// prices and the utility matrix.
class PayoffPrefix {
 public:
  PayoffPrefix(const StoppingLaw& law, double r, double c0, double c1)
      : law_(law), r_(r), c0_(c0), c1_(c1) {
    double upto = law.tail ? law.tail->t0 : law.grid.back();
    prefix_.resize(law.grid.size(), 0.0);
    auto val = [&](double t) { return (c0_ + c1_ * t) * std::exp(-r_ * t); };
    for (std::size_t j = 0; j + 1 < law.grid.size(); ++j) {
      double a = law.grid[j], b = law.grid[j + 1];
      double inc = (a >= upto - 1e-15)
                       ? 0.0
                       : 0.5 * (val(a) * law.f[j] + val(b) * law.f[j + 1]) * (b - a);
      prefix_[j + 1] = prefix_[j] + inc;
    }
  }

  double upto(double T) const {
    if (T <= 0.0) return 0.0;
    double total = 0.0;
    auto val = [&](double t) { return (c0_ + c1_ * t) * std::exp(-r_ * t); };
    double pre_end = law_.tail ? law_.tail->t0 : law_.grid.back();
    if (T < pre_end) {
      std::size_t j = detail::grid_index_below(law_.grid, T);
      total = prefix_[j];
      double a = law_.grid[j];
      double fa = law_.f[j];
      double fT = detail::interp(law_.grid, law_.f, T);
      total += 0.5 * (val(a) * fa + val(T) * fT) * (T - a);
    } else {
      std::size_t j = detail::grid_index_below(law_.grid, pre_end);
      total = prefix_[j];
      if (law_.tail)
        total += detail::tail_exp_poly_integral(*law_.tail, r_, c0_, c1_, T);
    }
    for (const Atom& a : law_.atoms)
      if (a.t <= T) total += val(a.t) * sum(a.mass);
    return total;
  }

  double full() const { return upto(kInf); }

 private:
  const StoppingLaw& law_;
  double r_, c0_, c1_;
  Vec prefix_;
};

}  // namespace tokenscreen

#endif
