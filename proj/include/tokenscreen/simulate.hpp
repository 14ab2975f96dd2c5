#ifndef TOKENSCREEN_SIMULATE_HPP
#define TOKENSCREEN_SIMULATE_HPP

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "skeleton.hpp"
#include "stopping.hpp"

namespace tokenscreen {

struct SimulateOpts {
  std::size_t paths = 100000;
  std::uint64_t seed = 1;
  unsigned threads = 1;
};

// One (tau, theta) sample per path. The RNG stream of a path depends only on
// (seed, path index), so results are byte-identical for any thread count.
struct Simulation {
  Vec tau;
  std::vector<int> theta;
  std::size_t n_states = 0;

  std::size_t paths() const { return tau.size(); }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

inline std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t idx) {
  std::uint64_t s = seed ^ (0xA3EC647659359ACDULL * (idx + 1));
  std::uint64_t a = splitmix64(s);
  std::uint64_t b = splitmix64(s);
  return std::mt19937_64(a ^ (b << 1));
}

inline double u01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct PathDraw {
  double tau;
  int theta;
};

// First arrival of the state-revealing jump process by thinning: each phase
// uses a dominating rate taken over its stored steps, the stationary region
// is a plain exponential.
inline PathDraw draw_path(const GreedySkeleton& sk, std::mt19937_64& rng) {
  for (const Phase& ph : sk.phases) {
    double lam = 0.0;
    for (const PhaseStep& st : ph.steps) lam = std::max(lam, sum(st.beta));
    lam = std::max(lam, sum(rates_in_phase(sk, ph, ph.t_end)));
    lam *= 1.0 + 1e-3;
    double t = ph.t_start;
    while (true) {
      t += -std::log1p(-u01(rng)) / lam;
      if (t >= ph.t_end) break;
      Vec beta = rates_in_phase(sk, ph, t);
      double R = sum(beta);
      if (R > lam)
        throw certificate_error("thinning bound violated inside a phase");
      if (u01(rng) * lam <= R) {
        double v = u01(rng) * R, acc = 0.0;
        for (std::size_t i = 0; i < beta.size(); ++i) {
          acc += beta[i];
          if (v < acc) return {t, static_cast<int>(i)};
        }
        return {t, static_cast<int>(beta.size()) - 1};
      }
    }
  }
  double tau = sk.t_hat_K - std::log1p(-u01(rng)) / sk.stat.hazard;
  double v = u01(rng) * sk.stat.hazard, acc = 0.0;
  for (std::size_t i = 0; i < sk.stat.beta.size(); ++i) {
    acc += sk.stat.beta[i];
    if (v < acc) return {tau, static_cast<int>(i)};
  }
  return {tau, static_cast<int>(sk.stat.beta.size()) - 1};
}

}  // namespace detail

inline Simulation simulate_paths(const GreedySkeleton& sk, const SimulateOpts& opts = {}) {
  if (opts.paths == 0) throw validation_error("need at least one simulation path");
  Simulation sim;
  sim.n_states = sk.n();
  sim.tau.resize(opts.paths);
  sim.theta.resize(opts.paths);

  constexpr std::size_t kBlock = 1024;
  const std::size_t nblocks = (opts.paths + kBlock - 1) / kBlock;
  std::atomic<std::size_t> next{0};
  std::exception_ptr err;
  std::mutex err_mu;

  auto work = [&]() {
    try {
      std::size_t b;
      while ((b = next.fetch_add(1)) < nblocks) {
        std::size_t lo = b * kBlock, hi = std::min(lo + kBlock, opts.paths);
        for (std::size_t idx = lo; idx < hi; ++idx) {
          auto rng = detail::path_rng(opts.seed, idx);
          auto d = detail::draw_path(sk, rng);
          sim.tau[idx] = d.tau;
          sim.theta[idx] = d.theta;
        }
      }
    } catch (...) {
      std::lock_guard<std::mutex> g(err_mu);
      if (!err) err = std::current_exception();
    }
  };

  unsigned nt = std::max(1u, opts.threads);
  if (nt == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < nt; ++k) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  if (err) std::rethrow_exception(err);
  return sim;
}

// Kolmogorov-Smirnov distance between the empirical stopping times and the
// law's total CDF.
inline double ks_statistic(const Simulation& sim, const StoppingLaw& law) {
  Vec s = sim.tau;
  std::sort(s.begin(), s.end());
  const double n = static_cast<double>(s.size());
  double ks = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    double Ft = F_at(law, s[i]);
    ks = std::max(ks, std::abs((i + 1) / n - Ft));
    ks = std::max(ks, std::abs(Ft - i / n));
  }
  return ks;
}

// Monte Carlo E[posterior at time t]: the deterministic no-news belief for
// paths still running, a vertex for revealed paths. A martingale check
// against the prior.
inline Vec mean_posterior(const GreedySkeleton& sk, const Simulation& sim, double t) {
  const std::size_t n = sim.n_states;
  Vec acc(n, 0.0);
  Belief pre = belief_at(sk, t);
  for (std::size_t p = 0; p < sim.paths(); ++p) {
    if (sim.tau[p] > t) {
      for (std::size_t i = 0; i < n; ++i) acc[i] += pre[i];
    } else {
      acc[sim.theta[p]] += 1.0;
    }
  }
  for (double& v : acc) v /= static_cast<double>(sim.paths());
  return acc;
}

inline Vec state_frequency(const Simulation& sim) {
  Vec freq(sim.n_states, 0.0);
  for (int th : sim.theta) freq[th] += 1.0;
  for (double& v : freq) v /= static_cast<double>(sim.paths());
  return freq;
}

}  // namespace tokenscreen

#endif
