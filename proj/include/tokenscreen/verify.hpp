#ifndef TOKENSCREEN_VERIFY_HPP
#define TOKENSCREEN_VERIFY_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

#include "linprog.hpp"
#include "screening.hpp"
#include "skeleton.hpp"
#include "stopping.hpp"
#include "types.hpp"

namespace tokenscreen {

// ----------------------------------------------------------------------------
// First-order-condition machinery.
//
// The optimality certificate for the greedy law is a multiplier path Lambda
// solving  zeta(t) Lambda'(t) = rho'(t) + chi Lambda(t)  with Lambda -> 0 at
// the far end, plus per-state constants a_theta. The auxiliary value
//   l(theta, t) = rho(0) - Lambda(0) H(e_theta)
//                 + int_0^t [rho' + chi Lambda + lambda D(e_theta | mu_s)] ds
// must stay weakly below a_theta everywhere, with equality once the state is
// being explored.

struct MultiplierPath {
  Vec grid;
  Vec zeta;
  Vec Lambda;
  Vec lambda;   // = -Lambda', taken from the ODE identity, never from differencing
  Vec a_theta;  // = l(theta, t_hat_K)
  double t_hat_K = 0.0;
  double horizon = 0.0;
  // first grid index of each uniform integration segment (one per transient
  // phase plus the stationary stretch); finite-difference checks should not
  // straddle segment boundaries
  std::vector<std::size_t> segment_start;
  // bound on the neglected Lambda mass past the horizon; zero when the
  // stationary stretch has a closed form
  double tail_bound = 0.0;
  std::size_t stat_index = 0;  // grid index of t_hat_K

  std::size_t n() const { return grid.size(); }
};

namespace detail {

inline double rho_prime(const Payoff& rho, double t) {
  if (rho.exp_poly)
    return (rho.c1 - rho.r * (rho.c0 + rho.c1 * t)) * std::exp(-rho.r * t);
  const double h = 1e-4;
  if (t < 2.0 * h) {
    // one-sided five-point stencil, still fourth order
    double f0 = rho.fn(t), f1 = rho.fn(t + h), f2 = rho.fn(t + 2 * h);
    double f3 = rho.fn(t + 3 * h), f4 = rho.fn(t + 4 * h);
    return (-25 * f0 + 48 * f1 - 36 * f2 + 16 * f3 - 3 * f4) / (12 * h);
  }
  return (rho.fn(t - 2 * h) - 8 * rho.fn(t - h) + 8 * rho.fn(t + h) - rho.fn(t + 2 * h)) /
         (12 * h);
}

// Append a uniform segment [a, b] with an even interval count and step <= want;
// the left endpoint is pushed only when the grid is empty.
inline void push_segment(Vec& grid, std::vector<std::size_t>& starts, double a, double b,
                         double want) {
  std::size_t m = static_cast<std::size_t>(std::ceil((b - a) / (2.0 * want))) * 2;
  m = std::max<std::size_t>(m, 2);
  if (grid.empty()) grid.push_back(a);
  starts.push_back(grid.size() - 1);
  for (std::size_t k = 1; k <= m; ++k) grid.push_back(a + (b - a) * k / m);
  grid.back() = b;  // close the segment exactly
}

}  // namespace detail

inline MultiplierPath foc_multiplier(const GreedySkeleton& sk, const Payoff& rho,
                                     double horizon = -1.0) {
  if (horizon < 0.0) horizon = sk.t_hat_K + 20.0 / sk.stat.hazard;
  if (!(horizon > sk.t_hat_K))
    throw validation_error("multiplier horizon must exceed the stationary onset");

  MultiplierPath mp;
  mp.t_hat_K = sk.t_hat_K;
  mp.horizon = horizon;

  const double step = 1e-3;
  for (const Phase& ph : sk.phases)
    detail::push_segment(mp.grid, mp.segment_start, ph.t_start, ph.t_end, step);
  mp.stat_index = mp.grid.empty() ? 0 : mp.grid.size() - 1;
  detail::push_segment(mp.grid, mp.segment_start, sk.t_hat_K, horizon, step);

  const std::size_t nodes = mp.grid.size();
  mp.zeta.resize(nodes);
  mp.Lambda.resize(nodes);
  mp.lambda.resize(nodes);
  for (std::size_t j = 0; j < nodes; ++j) {
    mp.zeta[j] = zeta_at(sk, mp.grid[j]);
    if (detail::rho_prime(rho, mp.grid[j]) >= 0.0)
      throw validation_error("payoff must be strictly decreasing for the FOC certificate");
  }

  // stationary stretch first
  const double zK = sk.stat.zeta;
  const double chi = sk.chi;
  if (rho.exp_poly) {
    // particular solution (A + B t) e^{-rt}; the homogeneous mode grows, so
    // the decaying particular solution is the one with Lambda(inf) = 0
    double B = rho.r * rho.c1 / (chi + zK * rho.r);
    double A = (zK * B - rho.c1 + rho.r * rho.c0) / (chi + zK * rho.r);
    for (std::size_t j = mp.stat_index; j < nodes; ++j)
      mp.Lambda[j] = (A + B * mp.grid[j]) * std::exp(-rho.r * mp.grid[j]);
    mp.tail_bound = 0.0;
  } else {
    mp.Lambda[nodes - 1] = 0.0;
    for (std::size_t j = nodes - 1; j > mp.stat_index; --j) {
      double a = mp.grid[j], b = mp.grid[j - 1], h = b - a;  // h < 0
      auto f = [&](double t, double L) { return (detail::rho_prime(rho, t) + chi * L) / zK; };
      double L = mp.Lambda[j];
      double k1 = f(a, L);
      double k2 = f(a + 0.5 * h, L + 0.5 * h * k1);
      double k3 = f(a + 0.5 * h, L + 0.5 * h * k2);
      double k4 = f(a + h, L + h * k3);
      mp.Lambda[j - 1] = L + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    }
    mp.tail_bound = std::abs(rho.fn(horizon)) / zK;
  }

  // transient phases, backward from the stationary onset
  for (std::size_t j = mp.stat_index; j > 0; --j) {
    double a = mp.grid[j], b = mp.grid[j - 1], h = b - a;  // h < 0
    auto f = [&](double t, double L) {
      return (detail::rho_prime(rho, t) + chi * L) / zeta_at(sk, t);
    };
    double L = mp.Lambda[j];
    double k1 = f(a, L);
    double k2 = f(a + 0.5 * h, L + 0.5 * h * k1);
    double k3 = f(a + 0.5 * h, L + 0.5 * h * k2);
    double k4 = f(a + h, L + h * k3);
    mp.Lambda[j - 1] = L + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
  }

  for (std::size_t j = 0; j < nodes; ++j)
    mp.lambda[j] = -(detail::rho_prime(rho, mp.grid[j]) + chi * mp.Lambda[j]) / mp.zeta[j];

  // forward pass for the constants a_theta (see integrate_l below)
  mp.a_theta.assign(sk.n(), 0.0);
  const double rho0 = rho.fn(0.0);
  for (std::size_t th = 0; th < sk.n(); ++th) {
    double l = rho0 - mp.Lambda[0] * sk.entropy.vertex_value(sk.n(), th);
    std::size_t j = 0;
    while (j < mp.stat_index) {
      double h = mp.grid[j + 1] - mp.grid[j];
      auto g = [&](std::size_t k) {
        double D = divergence_to_state(sk.entropy, th, belief_at(sk, mp.grid[k]));
        return detail::rho_prime(rho, mp.grid[k]) + chi * mp.Lambda[k] + mp.lambda[k] * D;
      };
      l += (h / 3.0) * (g(j) + 4.0 * g(j + 1) + g(j + 2));
      j += 2;
    }
    mp.a_theta[th] = l;
  }
  return mp;
}

// Per-state activation time: the first phase whose active set contains theta,
// else the stationary onset.
inline double activation_time(const GreedySkeleton& sk, std::size_t theta) {
  for (const Phase& ph : sk.phases)
    if (std::find(ph.active.begin(), ph.active.end(), static_cast<int>(theta)) !=
        ph.active.end())
      return ph.t_start;
  return sk.t_hat_K;
}

struct FocReport {
  double max_violation = -kInf;    // max over (theta, t) of l - a_theta
  double max_active_gap = 0.0;     // max |l - a_theta| where theta is already active
  double min_inactive_dl = kInf;   // min dl/dt before activation; must be positive
  double max_active_abs_dl = 0.0;  // max |dl/dt| after activation; must vanish
  bool sign_pattern_ok = false;
  Vec activation;                // per-state activation time
  std::vector<Vec> l;            // [theta][node]
  std::vector<Vec> dl;           // [theta][node]
};

inline FocReport foc_check(const GreedySkeleton& sk, const StoppingLaw& law,
                           const MultiplierPath& mp, const Payoff& rho) {
  if (std::abs(law.chi - sk.chi) > 1e-12)
    throw validation_error("stopping law and skeleton disagree on chi");
  if (mp.n() < 3 || std::abs(mp.t_hat_K - sk.t_hat_K) > 1e-12)
    throw validation_error("multiplier path was built from a different skeleton");

  const std::size_t n = sk.n();
  const std::size_t nodes = mp.n();
  FocReport rep;
  rep.activation.resize(n);
  rep.l.assign(n, Vec(nodes, 0.0));
  rep.dl.assign(n, Vec(nodes, 0.0));

  const double rho0 = rho.fn(0.0);
  for (std::size_t th = 0; th < n; ++th) {
    rep.activation[th] = activation_time(sk, th);
    for (std::size_t j = 0; j < nodes; ++j) {
      double D = divergence_to_state(sk.entropy, th, belief_at(sk, mp.grid[j]));
      rep.dl[th][j] =
          detail::rho_prime(rho, mp.grid[j]) + sk.chi * mp.Lambda[j] + mp.lambda[j] * D;
    }
    // prefix integral: Simpson over interval pairs anchored at even offsets
    // within each uniform segment, trapezoid for the odd intermediate node
    Vec& l = rep.l[th];
    const Vec& g = rep.dl[th];
    l[0] = rho0 - mp.Lambda[0] * sk.entropy.vertex_value(n, th);
    for (std::size_t s = 0; s < mp.segment_start.size(); ++s) {
      std::size_t b = mp.segment_start[s];
      std::size_t e = (s + 1 < mp.segment_start.size()) ? mp.segment_start[s + 1]
                                                        : nodes - 1;
      for (std::size_t j = b; j + 2 <= e; j += 2) {
        double h = mp.grid[j + 1] - mp.grid[j];
        l[j + 1] = l[j] + 0.5 * h * (g[j] + g[j + 1]);
        l[j + 2] = l[j] + (h / 3.0) * (g[j] + 4.0 * g[j + 1] + g[j + 2]);
      }
    }
    for (std::size_t j = 0; j < nodes; ++j) {
      double gap = l[j] - mp.a_theta[th];
      rep.max_violation = std::max(rep.max_violation, gap);
      if (mp.grid[j] >= rep.activation[th] - 1e-12) {
        rep.max_active_gap = std::max(rep.max_active_gap, std::abs(gap));
        rep.max_active_abs_dl = std::max(rep.max_active_abs_dl, std::abs(g[j]));
      } else {
        rep.min_inactive_dl = std::min(rep.min_inactive_dl, g[j]);
      }
    }
  }
  rep.sign_pattern_ok = rep.min_inactive_dl > 0.0 && rep.max_active_abs_dl <= 1e-7;
  return rep;
}

// ----------------------------------------------------------------------------
// Discretized upper bound on sup_F int rho dF subject to the capacity
// constraint, solved as a cutting-plane LP.
//
// Primal variables are per-state stopping masses m_{i,j} >= 0 on the grid.
// The convex term H(remaining mass) in the capacity constraint is replaced by
// supporting hyperplanes gamma . R (valid from below since H is convex and
// degree-1 homogeneous), so every LP relaxation upper-bounds the continuous
// optimum. We solve the LP dual so that each new cut is a warm-started column
// rather than a fresh row.

struct OracleBound {
  double value = 0.0;
  int rounds = 0;
  std::size_t cuts = 0;
  bool converged = false;
  double max_violation = 0.0;  // capacity violation of the last LP iterate
};

inline Vec geometric_grid(double t_end, std::size_t points, double first_step) {
  if (!(t_end > 0.0) || points < 3 || !(first_step > 0.0))
    throw validation_error("geometric grid needs t_end > 0, points >= 3, first_step > 0");
  if (first_step * static_cast<double>(points - 1) >= t_end)
    throw validation_error("geometric grid: first_step too large for the span");
  auto span = [&](double g) {
    double s = 0.0, p = 1.0;
    for (std::size_t k = 0; k + 1 < points; ++k) {
      s += p;
      p *= g;
    }
    return first_step * s;
  };
  double lo = 1.0, hi = 2.0;
  while (span(hi) < t_end) hi *= 2.0;
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    (span(mid) < t_end ? lo : hi) = mid;
  }
  Vec grid(points, 0.0);
  double h = first_step, g = 0.5 * (lo + hi);
  for (std::size_t j = 1; j < points; ++j) {
    grid[j] = grid[j - 1] + h;
    h *= g;
  }
  grid.back() = t_end;
  return grid;
}

namespace detail {

// Supporting-hyperplane gradient of H at a nonnegative mass vector, clipped
// away from the boundary so the gradient evaluator stays in its domain. Any
// such gradient yields a valid cut by homogeneity.
inline Vec cut_gradient(const EntropyModel& entropy, Vec rem) {
  double s = 0.0;
  for (double x : rem) s += std::max(x, 0.0);
  if (s <= 1e-12) rem.assign(rem.size(), 1.0);
  double floor = 1e-9 * std::max(s, 1.0);
  for (double& x : rem) x = std::max(x, floor);
  double tot = sum(rem);
  for (double& x : rem) x /= tot;
  return entropy.gradient(Belief(rem));
}

}  // namespace detail

inline OracleBound oracle_upper_bound(const Payoff& rho, const EntropyModel& entropy,
                                      const Belief& mu0, double chi, const Vec& grid,
                                      double eps_cap = 1e-7) {
  const std::size_t n = mu0.size();
  const std::size_t J = grid.size();
  if (J < 2 || grid.front() != 0.0)
    throw validation_error("oracle grid must start at 0 with at least two points");
  for (std::size_t j = 0; j + 1 < J; ++j)
    if (!(grid[j] < grid[j + 1])) throw validation_error("oracle grid must increase");

  Vec rho_j(J);
  for (std::size_t j = 0; j < J; ++j) {
    rho_j[j] = rho.fn(grid[j]);
    if (rho_j[j] < -1e-12) throw validation_error("oracle payoff must be nonnegative");
  }

  // left-endpoint capacity weights: mass stopping at t_j is credited with
  // occupying a slot until t_{j+1}, which only relaxes the constraint
  Vec delta(J);
  for (std::size_t j = 0; j + 1 < J; ++j) delta[j] = grid[j + 1] - grid[j];
  delta[J - 1] = delta[J - 2];
  Vec cumdelta(J + 1, 0.0);
  for (std::size_t j = 0; j < J; ++j) cumdelta[j + 1] = cumdelta[j] + delta[j];

  Vec hvert(n);
  for (std::size_t i = 0; i < n; ++i) hvert[i] = entropy.vertex_value(n, i);
  const double hmu0 = entropy.value(mu0.probs());

  struct Cut {
    std::size_t j;
    Vec gamma;
    Vec col;  // length n * J
    double rhs;
  };
  auto make_cut = [&](std::size_t j, const Vec& gamma) {
    Cut c;
    c.j = j;
    c.gamma = gamma;
    c.col.assign(n * J, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t jp = 0; jp <= j; ++jp) {
        double v = hvert[i] - gamma[i];
        if (jp < j) v += chi * (cumdelta[j + 1] - cumdelta[jp + 1]);
        c.col[i * J + jp] = v;
      }
    c.rhs = hmu0 - dot(gamma, mu0.probs()) + chi * cumdelta[j + 1];
    return c;
  };

  // warm cuts: tangents at the greedy law's own remaining-mass path
  GreedySkeleton sk = build_skeleton(entropy, mu0, chi);
  StoppingLaw greedy = stopping_law(sk, std::max(grid.back(), sk.t_hat_K + 1.0));
  std::vector<Cut> cuts;
  cuts.reserve(J + 64);
  for (std::size_t j = 0; j < J; ++j) {
    Vec rem(n);
    for (std::size_t i = 0; i < n; ++i)
      rem[i] = mu0[i] - Fi_continuous_at(greedy, i, grid[j]);
    cuts.push_back(make_cut(j, detail::cut_gradient(entropy, rem)));
  }

  // LP dual of  max rho . m  s.t. mass rows and cut rows: variables
  // [u+, u-, v(cuts), s(surplus)], one equality row per primal mass m_{i,j};
  // the duals of those rows recover the primal masses.
  const std::size_t rows = n * J;
  std::size_t cols = 2 * n + cuts.size() + rows;
  Mat A = Mat::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  Vec b(rows), cost(cols, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < J; ++j) {
      std::size_t p = i * J + j;
      A(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(i)) = 1.0;
      A(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(n + i)) = -1.0;
      for (std::size_t k = 0; k < cuts.size(); ++k)
        A(static_cast<Eigen::Index>(p), static_cast<Eigen::Index>(2 * n + k)) =
            cuts[k].col[p];
      A(static_cast<Eigen::Index>(p),
        static_cast<Eigen::Index>(2 * n + cuts.size() + p)) = -1.0;
      b[p] = rho_j[j];
    }
  for (std::size_t i = 0; i < n; ++i) {
    cost[i] = mu0[i];
    cost[n + i] = -mu0[i];
  }
  for (std::size_t k = 0; k < cuts.size(); ++k) cost[2 * n + k] = cuts[k].rhs;

  SimplexLP lp(A, b, cost);
  OracleBound out;
  const int max_rounds = 50;
  for (out.rounds = 1; out.rounds <= max_rounds; ++out.rounds) {
    if (lp.solve() != LPStatus::kOptimal)
      throw certificate_error("oracle LP failed to solve; the relaxation should be bounded");
    Vec m = lp.duals();
    for (double& v : m) v = std::max(v, 0.0);

    // true capacity violation of the recovered primal masses; the occupancy
    // integral int_0^{t_j} (1 - F) splits into cumdelta[j+1] (1 - M_{<j}) for
    // the still-running mass plus the time-weighted credit of earlier stops
    out.max_violation = -kInf;
    std::vector<std::pair<std::size_t, Vec>> fresh;
    Vec learned(n, 0.0), rem(n);
    double stopped = 0.0;  // total mass stopped strictly before t_j
    double credit = 0.0;   // sum of cumdelta[jp+1] * mass stopped at t_jp
    for (std::size_t j = 0; j < J; ++j) {
      double lhs = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        learned[i] += m[i * J + j];
        rem[i] = std::max(mu0[i] - learned[i], 0.0);
        lhs += learned[i] * hvert[i];
      }
      double hrem = (sum(rem) > 1e-12) ? entropy.value(rem) : 0.0;
      lhs += hrem - hmu0;
      double rhs = chi * (cumdelta[j + 1] * (1.0 - stopped) + credit);
      double viol = lhs - rhs;
      out.max_violation = std::max(out.max_violation, viol);
      // separate slightly below the acceptance threshold so the loop does not
      // stall exactly at eps_cap
      if (viol > 0.1 * eps_cap) fresh.emplace_back(j, detail::cut_gradient(entropy, rem));
      double mj = 0.0;
      for (std::size_t i = 0; i < n; ++i) mj += m[i * J + j];
      stopped += mj;
      credit += cumdelta[j + 1] * mj;
    }

    out.value = lp.objective();
    out.cuts = cuts.size();
    if (out.max_violation <= eps_cap) {
      out.converged = true;
      return out;
    }

    bool added = false;
    for (auto& [j, gamma] : fresh) {
      bool dup = false;
      for (const Cut& c : cuts) {
        if (c.j != j) continue;
        double d = 0.0;
        for (std::size_t i = 0; i < n; ++i) d = std::max(d, std::abs(c.gamma[i] - gamma[i]));
        if (d < 5e-13) {
          dup = true;
          break;
        }
      }
      if (dup) continue;
      Cut c = make_cut(j, gamma);
      lp.add_column(c.col, c.rhs);
      cuts.push_back(std::move(c));
      added = true;
    }
    if (!added) break;  // separation cannot improve; report as unconverged
  }
  out.cuts = cuts.size();
  return out;
}

// ----------------------------------------------------------------------------
// Global incentive-compatibility audit of a finished menu.

struct IcReport {
  double max_gain = -kInf;   // best misreport advantage across the grid
  double r_true = 0.0;       // type achieving it
  double r_reported = 0.0;   // report achieving it
  double min_ir_slack = kInf;
  double r_min_ir = 0.0;
  double ir_slack_top = 0.0;  // participation slack of the highest type
};

// scale(r) multiplies the gross payoff term, which is how heterogeneous
// valuations q(r) enter; an empty scale means q = 1 and keeps the arithmetic
// of the homogeneous audit unchanged.
inline IcReport ic_audit(const TokenMenu& menu, const TypeModel& tm, const StoppingLaw& law,
                         const std::function<double(double)>& scale, int threads = 1) {
  const std::size_t N = menu.rows.size();
  if (N < 2) throw validation_error("ic audit needs a menu with at least two rows");
  for (const MenuRow& row : menu.rows)
    if (!tm.contains(row.r)) throw validation_error("menu row outside the type support");
  threads = std::max(threads, 1);

  std::vector<double> own(N), best(N);
  std::vector<std::size_t> best_j(N);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (;;) {
      std::size_t i = next.fetch_add(1);
      if (i >= N) return;
      PayoffPrefix prefix(law, menu.rows[i].r, 1.0, 0.0);
      double s = scale ? scale(menu.rows[i].r) : 1.0;
      double bi = -kInf;
      std::size_t bj = 0;
      for (std::size_t j = 0; j < N; ++j) {
        double net = s * prefix.upto(menu.rows[j].T) - menu.rows[j].price;
        if (j == i) own[i] = net;
        if (net > bi) {
          bi = net;
          bj = j;
        }
      }
      best[i] = bi;
      best_j[i] = bj;
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  IcReport rep;
  for (std::size_t i = 0; i < N; ++i) {
    double gain = best[i] - own[i];
    if (gain > rep.max_gain) {
      rep.max_gain = gain;
      rep.r_true = menu.rows[i].r;
      rep.r_reported = menu.rows[best_j[i]].r;
    }
    if (own[i] < rep.min_ir_slack) {
      rep.min_ir_slack = own[i];
      rep.r_min_ir = menu.rows[i].r;
    }
  }
  rep.ir_slack_top = own[N - 1];
  return rep;
}

inline IcReport ic_audit(const TokenMenu& menu, const TypeModel& tm, const StoppingLaw& law,
                         int threads = 1) {
  return ic_audit(menu, tm, law, std::function<double(double)>{}, threads);
}

}  // namespace tokenscreen

#endif
