#ifndef TOKENSCREEN_SKELETON_HPP
#define TOKENSCREEN_SKELETON_HPP

#include <algorithm>
#include <cmath>
#include <vector>

#include "entropy.hpp"
#include "types.hpp"

namespace tokenscreen {

struct SkeletonOpts {
  double eps_iso = 1e-7;    // iso-divergence tolerance along a phase
  double eps_event = 1e-10; // bisection time tolerance for phase boundaries
  double max_step = 1e-3;   // RK4 step is min(max_step, 0.01 * zeta(0) / chi)
  bool check_assumption1 = true;
};

// One stored integration node of a phase, with enough data for cubic Hermite
// dense output and for reconstructing rates without re-integration.
struct PhaseStep {
  double t;
  Vec mu;
  Vec dmu;   // drift at mu
  Vec beta;  // full-length rate vector, zeros off the active set
  double zeta;
};

struct Phase {
  int index = 0;
  double t_start = 0.0;
  double t_end = 0.0;
  std::vector<int> active;
  std::vector<PhaseStep> steps;
};

struct Stationary {
  Vec mu;
  Vec beta;
  double hazard = 0.0;  // total jump rate h_K
  double zeta = 0.0;    // common divergence at the stationary belief
};

struct GreedySkeleton {
  EntropyModel entropy = EntropyModel::shannon();
  Vec mu0;
  double chi = 0.0;
  std::vector<Phase> phases;  // transient phases only; empty if stationary at t=0
  Stationary stat;
  double t_hat_K = 0.0;  // onset of the stationary phase
  SkeletonOpts opts;

  std::size_t n() const { return mu0.size(); }
};

namespace detail {

inline Vec divergences(const EntropyModel& model, const Belief& mu) {
  Vec d(mu.size());
  for (std::size_t th = 0; th < mu.size(); ++th) d[th] = divergence_to_state(model, th, mu);
  return d;
}

// beta on the active set: chi * Sigma^{-1} 1 / (d' Sigma^{-1} 1). Positivity
// is the Stieltjes property; a nonpositive component means the entropy model
// violates it.
inline Vec active_rates(const EntropyModel& model, const Belief& mu,
                        const std::vector<int>& active, const Vec& d_all, double chi) {
  const std::size_t k = active.size();
  Vec beta(mu.size(), 0.0);
  if (k == 1) {
    double d = d_all[active[0]];
    if (!(d > 0.0)) throw validation_error("active divergence not positive");
    beta[active[0]] = chi / d;
    return beta;
  }
  Mat sigma = hessian_submatrix(model, mu, active);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(static_cast<Eigen::Index>(k));
  Eigen::VectorXd v = sigma.ldlt().solve(ones);
  double denom = 0.0;
  for (std::size_t i = 0; i < k; ++i) denom += d_all[active[i]] * v(static_cast<Eigen::Index>(i));
  if (!(denom > 0.0)) throw validation_error("degenerate rate normalization d'Sigma^{-1}1 <= 0");
  for (std::size_t i = 0; i < k; ++i) {
    double b = chi * v(static_cast<Eigen::Index>(i)) / denom;
    if (!(b > 0.0))
      throw validation_error("nonpositive greedy rate: entropy model is not Stieltjes");
    beta[active[i]] = b;
  }
  return beta;
}

// Compensating drift: dmu/dt = -sum_theta beta(theta) (e_theta - mu).
inline Vec drift(const Vec& mu, const Vec& beta) {
  double btot = sum(beta);
  Vec f(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) f[i] = mu[i] * btot - beta[i];
  return f;
}

struct FieldEval {
  Vec dmu, beta, d_all;
  double zeta;
};

inline FieldEval eval_field(const EntropyModel& model, const Vec& mu_raw,
                            const std::vector<int>& active, double chi) {
  Belief mu(mu_raw);
  FieldEval out;
  out.d_all = divergences(model, mu);
  out.beta = active_rates(model, mu, active, out.d_all, chi);
  out.dmu = drift(mu_raw, out.beta);
  out.zeta = kInf;
  for (int th : active) out.zeta = std::min(out.zeta, out.d_all[th]);
  return out;
}

inline Vec rk4_step(const EntropyModel& model, const Vec& mu, const std::vector<int>& active,
                    double chi, double h) {
  Vec k1 = eval_field(model, mu, active, chi).dmu;
  Vec p(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) p[i] = mu[i] + 0.5 * h * k1[i];
  Vec k2 = eval_field(model, p, active, chi).dmu;
  for (std::size_t i = 0; i < mu.size(); ++i) p[i] = mu[i] + 0.5 * h * k2[i];
  Vec k3 = eval_field(model, p, active, chi).dmu;
  for (std::size_t i = 0; i < mu.size(); ++i) p[i] = mu[i] + h * k3[i];
  Vec k4 = eval_field(model, p, active, chi).dmu;
  Vec out(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    out[i] = mu[i] + (h / 6.0) * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
  // the drift conserves total mass exactly; shave off the roundoff so long
  // integrations never trip the simplex validator
  double tot = sum(out);
  for (auto& x : out) x /= tot;
  return out;
}

// Distance of the closest inactive state to the active iso level; a phase
// ends when this hits zero.
inline double entry_gap(const Vec& d_all, const std::vector<int>& active) {
  double dmin = kInf;
  for (int th : active) dmin = std::min(dmin, d_all[th]);
  double gap = kInf;
  for (std::size_t th = 0; th < d_all.size(); ++th)
    if (std::find(active.begin(), active.end(), static_cast<int>(th)) == active.end())
      gap = std::min(gap, d_all[th] - dmin);
  return gap;
}

}  // namespace detail

inline GreedySkeleton build_skeleton(const EntropyModel& model, const Belief& mu0, double chi,
                                     const SkeletonOpts& opts = {}) {
  using namespace detail;
  if (!(chi > 0.0)) throw validation_error("chi must be positive");
  if (!mu0.interior(kDeltaInt)) throw validation_error("prior must be interior (floor 1e-9)");
  if (opts.check_assumption1) {
    auto rep = assumption1_report(model, 20, mu0.size());
    if (!rep.pass) throw validation_error("entropy model fails the boundedness diagnostics");
  }
  const std::size_t n = mu0.size();

  GreedySkeleton sk;
  sk.entropy = model;
  sk.mu0 = mu0.probs();
  sk.chi = chi;
  sk.opts = opts;

  Vec mu = mu0.probs();
  Vec d_all = divergences(model, mu0);
  double dmin = *std::min_element(d_all.begin(), d_all.end());
  std::vector<int> active;
  for (std::size_t th = 0; th < n; ++th)
    if (d_all[th] <= dmin + opts.eps_iso) active.push_back(static_cast<int>(th));

  const double h = std::min(opts.max_step, 0.01 * dmin / chi);
  double t = 0.0;
  int phase_index = 0;

  while (active.size() < n) {
    if (phase_index >= static_cast<int>(n))
      throw certificate_error("more phases than states: active sets must be nested");
    Phase ph;
    ph.index = phase_index;
    ph.t_start = t;
    ph.active = active;

    auto record = [&](double tt, const Vec& m) {
      FieldEval fe = eval_field(model, m, active, chi);
      double lo = kInf, hi = -kInf;
      for (int th : active) {
        lo = std::min(lo, fe.d_all[th]);
        hi = std::max(hi, fe.d_all[th]);
      }
      if (hi - lo > opts.eps_iso)
        throw certificate_error("iso-divergence drift exceeded eps_iso during a phase");
      ph.steps.push_back(PhaseStep{tt, m, fe.dmu, fe.beta, fe.zeta});
      return fe;
    };
    record(t, mu);

    bool transitioned = false;
    while (!transitioned) {
      Vec mu_next = rk4_step(model, mu, active, chi, h);
      Vec d_next = divergences(model, Belief(mu_next));
      if (entry_gap(d_next, active) <= 0.0) {
        // bisect the crossing time within (t, t+h]
        double lo = 0.0, hi = h;
        while (hi - lo > opts.eps_event) {
          double mid = 0.5 * (lo + hi);
          Vec mu_mid = rk4_step(model, mu, active, chi, mid);
          if (entry_gap(divergences(model, Belief(mu_mid)), active) <= 0.0)
            hi = mid;
          else
            lo = mid;
        }
        Vec mu_event = rk4_step(model, mu, active, chi, hi);
        t += hi;
        mu = mu_event;
        record(t, mu);
        Vec d_event = divergences(model, Belief(mu));
        double dm = kInf;
        for (int th : active) dm = std::min(dm, d_event[th]);
        std::vector<int> grown = active;
        for (std::size_t th = 0; th < n; ++th)
          if (std::find(active.begin(), active.end(), static_cast<int>(th)) == active.end() &&
              d_event[th] - dm <= 1e-9)
            grown.push_back(static_cast<int>(th));
        if (grown.size() == active.size())
          throw certificate_error("event bisection failed to add a state");
        std::sort(grown.begin(), grown.end());
        active = std::move(grown);
        transitioned = true;
      } else {
        t += h;
        mu = mu_next;
        if (*std::min_element(mu.begin(), mu.end()) < kDeltaInt)
          throw validation_error(
              "belief path hit the boundary before a new state entered (assumption failure)");
        record(t, mu);
      }
    }
    ph.t_end = t;
    sk.phases.push_back(std::move(ph));
    ++phase_index;
  }

  sk.t_hat_K = t;
  Belief muK(mu);
  Vec dK = divergences(model, muK);
  double denom = 0.0;
  for (std::size_t th = 0; th < n; ++th) denom += mu[th] * dK[th];
  double c = chi / denom;
  sk.stat.mu = mu;
  sk.stat.hazard = c;
  sk.stat.zeta = *std::min_element(dK.begin(), dK.end());
  sk.stat.beta.assign(n, 0.0);
  for (std::size_t th = 0; th < n; ++th) sk.stat.beta[th] = c * mu[th];
  return sk;
}

namespace detail {
inline const Phase* phase_for(const GreedySkeleton& sk, double t) {
  for (const Phase& ph : sk.phases)
    if (t < ph.t_end || (&ph == &sk.phases.back() && t <= ph.t_end)) {
      if (t >= ph.t_start) return &ph;
    }
  return nullptr;
}

inline Vec hermite(const PhaseStep& a, const PhaseStep& b, double t) {
  double dt = b.t - a.t;
  if (dt <= 0.0) return a.mu;
  double s = (t - a.t) / dt;
  double s2 = s * s, s3 = s2 * s;
  double h00 = 2 * s3 - 3 * s2 + 1, h10 = s3 - 2 * s2 + s;
  double h01 = -2 * s3 + 3 * s2, h11 = s3 - s2;
  Vec out(a.mu.size());
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = h00 * a.mu[i] + h10 * dt * a.dmu[i] + h01 * b.mu[i] + h11 * dt * b.dmu[i];
  // renormalize the roundoff so downstream Belief validation stays happy
  double tot = sum(out);
  for (auto& x : out) x /= tot;
  return out;
}
}  // namespace detail

// Dense output scoped to one phase; valid on [t_start, t_end] including the
// right endpoint (where the global accessors already switch to the next
// phase). The law integrator needs these one-sided values because per-state
// rates jump at phase boundaries.
inline Belief belief_in_phase(const GreedySkeleton&, const Phase& ph, double t) {
  const auto& st = ph.steps;
  auto it = std::upper_bound(st.begin(), st.end(), t,
                             [](double tv, const PhaseStep& s) { return tv < s.t; });
  if (it == st.begin()) return Belief(st.front().mu);
  if (it == st.end()) return Belief(st.back().mu);
  const PhaseStep& b = *it;
  const PhaseStep& a = *(it - 1);
  return Belief(detail::hermite(a, b, t));
}

inline Vec rates_in_phase(const GreedySkeleton& sk, const Phase& ph, double t) {
  Belief mu = belief_in_phase(sk, ph, t);
  Vec d_all = detail::divergences(sk.entropy, mu);
  return detail::active_rates(sk.entropy, mu, ph.active, d_all, sk.chi);
}

inline Belief belief_at(const GreedySkeleton& sk, double t) {
  if (t < 0.0) throw validation_error("time must be nonnegative");
  if (t >= sk.t_hat_K || sk.phases.empty()) return Belief(sk.stat.mu);
  const Phase* ph = detail::phase_for(sk, t);
  if (!ph) return Belief(sk.stat.mu);
  return belief_in_phase(sk, *ph, t);
}

inline Vec rates_at(const GreedySkeleton& sk, double t) {
  if (t < 0.0) throw validation_error("time must be nonnegative");
  if (t >= sk.t_hat_K || sk.phases.empty()) return sk.stat.beta;
  const Phase* ph = detail::phase_for(sk, t);
  if (!ph) return sk.stat.beta;
  Belief mu = belief_at(sk, t);
  Vec d_all = detail::divergences(sk.entropy, mu);
  return detail::active_rates(sk.entropy, mu, ph->active, d_all, sk.chi);
}

inline double zeta_at(const GreedySkeleton& sk, double t) {
  if (t >= sk.t_hat_K || sk.phases.empty()) return sk.stat.zeta;
  const Phase* ph = detail::phase_for(sk, t);
  if (!ph) return sk.stat.zeta;
  Belief mu = belief_at(sk, t);
  double z = kInf;
  for (int th : ph->active) z = std::min(z, divergence_to_state(sk.entropy, th, mu));
  return z;
}

// Total jump intensity sum_theta beta_t(theta).
inline double total_rate_at(const GreedySkeleton& sk, double t) {
  return sum(rates_at(sk, t));
}

}  // namespace tokenscreen

#endif
