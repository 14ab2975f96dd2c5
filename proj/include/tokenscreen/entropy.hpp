#ifndef TOKENSCREEN_ENTROPY_HPP
#define TOKENSCREEN_ENTROPY_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <utility>

#include "types.hpp"

namespace tokenscreen {

using Mat = Eigen::MatrixXd;
using Divergence = double;

enum class EntropyKind { shannon, quadratic_binary, custom };

// Generalized entropy H with the degree-1 homogeneous normalization:
//   grad H(mu) . mu = H(mu),   Hess H(mu) . mu = 0.
// value() accepts unnormalized mass vectors (the homogeneous extension);
// gradient()/hessian() are evaluated at interior beliefs only.
class EntropyModel {
 public:
  using ValueFn = std::function<double(const Vec&)>;
  using GradFn = std::function<Vec(const Vec&)>;
  using HessFn = std::function<Mat(const Vec&)>;

  static EntropyModel shannon() {
    EntropyModel m;
    m.kind_ = EntropyKind::shannon;
    m.units_ = "nats";
    m.value_ = [](const Vec& x) {
      double s = sum(x);
      double h = 0.0;
      for (double xi : x)
        if (xi > 0.0) h += xi * std::log(xi / s);
      return h;
    };
    m.grad_ = [](const Vec& mu) {
      Vec g(mu.size());
      for (std::size_t k = 0; k < mu.size(); ++k) g[k] = std::log(mu[k]);
      return g;
    };
    m.hess_ = [](const Vec& mu) {
      const auto n = static_cast<Eigen::Index>(mu.size());
      Mat h = Mat::Constant(n, n, -1.0);
      for (Eigen::Index k = 0; k < n; ++k) h(k, k) += 1.0 / mu[k];
      return h;
    };
    return m;
  }

  // Binary model with H(mu) = |mu(1) - 1/2|^alpha in the 1-D parametrization
  // m = P(theta = 1), extended to masses by H(x) = S h(x1/S). alpha = 2 is the
  // quadratic-variation case; larger exponents serve the quality extension.
  static EntropyModel quadratic_binary(double alpha = 2.0) {
    if (!(alpha >= 2.0)) throw validation_error("quadratic-binary requires alpha >= 2");
    EntropyModel m;
    m.kind_ = EntropyKind::quadratic_binary;
    m.alpha_ = alpha;
    m.units_ = "belief^alpha";
    auto h = [alpha](double u) { return std::pow(std::abs(u - 0.5), alpha); };
    auto hp = [alpha](double u) {
      double d = u - 0.5;
      return (d >= 0 ? 1.0 : -1.0) * alpha * std::pow(std::abs(d), alpha - 1.0);
    };
    auto hpp = [alpha](double u) {
      return alpha * (alpha - 1.0) * std::pow(std::abs(u - 0.5), alpha - 2.0);
    };
    m.value_ = [h](const Vec& x) {
      if (x.size() != 2) throw validation_error("quadratic-binary is a two-state model");
      double s = x[0] + x[1];
      return s * h(x[1] / s);
    };
    m.grad_ = [h, hp](const Vec& mu) {
      double mm = mu[1];
      return Vec{h(mm) - hp(mm) * mm, h(mm) + hp(mm) * (1.0 - mm)};
    };
    m.hess_ = [hpp](const Vec& mu) {
      double mm = mu[1], c = hpp(mm);
      Mat out(2, 2);
      out(0, 0) = c * mm * mm;
      out(0, 1) = out(1, 0) = -c * mm * (1.0 - mm);
      out(1, 1) = c * (1.0 - mm) * (1.0 - mm);
      return out;
    };
    return m;
  }

  static EntropyModel custom(ValueFn v, GradFn g, HessFn hs, std::string units) {
    EntropyModel m;
    m.kind_ = EntropyKind::custom;
    m.units_ = std::move(units);
    m.value_ = std::move(v);
    m.grad_ = std::move(g);
    m.hess_ = std::move(hs);
    return m;
  }

  EntropyKind kind() const { return kind_; }
  double alpha() const { return alpha_; }
  const std::string& units() const { return units_; }

  double value(const Vec& x) const {
    bool all_zero = true;
    for (double xi : x) {
      if (!(xi >= 0.0)) throw validation_error("mass vector has a negative component");
      if (xi > 0.0) all_zero = false;
    }
    if (all_zero) throw validation_error("entropy of the all-zero mass vector is undefined");
    return value_(x);
  }

  Vec gradient(const Belief& mu) const {
    require_interior(mu);
    return grad_(mu.probs());
  }

  Mat hessian(const Belief& mu) const {
    require_interior(mu);
    return hess_(mu.probs());
  }

  // Vertex entropy H(e_theta); needed by the capacity functional and the FOC
  // constants, and cheap enough to not cache.
  double vertex_value(std::size_t n, std::size_t theta) const {
    Vec e(n, 0.0);
    e[theta] = 1.0;
    return value_(e);
  }

 private:
  static void require_interior(const Belief& mu) {
    if (!mu.interior())
      throw validation_error("belief too close to the simplex boundary (floor 1e-10)");
  }

  EntropyKind kind_ = EntropyKind::custom;
  double alpha_ = 0.0;
  std::string units_;
  ValueFn value_;
  GradFn grad_;
  HessFn hess_;
};

inline double entropy_value(const EntropyModel& model, const Vec& x) { return model.value(x); }

inline Divergence bregman(const EntropyModel& model, const Belief& target, const Belief& base) {
  const Vec& t = target.probs();
  const Vec& b = base.probs();
  Vec g = model.gradient(base);
  double d = model.value(t) - model.value(b);
  for (std::size_t i = 0; i < t.size(); ++i) d -= g[i] * (t[i] - b[i]);
  return d;
}

inline Divergence divergence_to_state(const EntropyModel& model, std::size_t theta,
                                      const Belief& mu) {
  return bregman(model, Belief::vertex(mu.size(), theta), mu);
}

inline Mat hessian_submatrix(const EntropyModel& model, const Belief& mu,
                             const std::vector<int>& active) {
  Mat full = model.hessian(mu);
  const auto k = static_cast<Eigen::Index>(active.size());
  Mat sub(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b) sub(a, b) = full(active[a], active[b]);
  return sub;
}

struct Assumption1Report {
  double sup_min_divergence = 0.0;  // part 1: worst-case distance to the closest state
  double min_closest_prob = 1.0;    // part 2: empirical epsilon
  double max_cross_term = -kInf;    // part 3: max (e_t - mu)' Hess H (e_t' - mu), t != t'
  bool part1_pass = false;
  bool part2_pass = false;
  bool part3_pass = false;
  bool pass = false;
  int grid_points = 0;
};

namespace detail {
// Interior simplex grid: all compositions (k_1,...,k_n), k_i >= 1, sum = d,
// mapped to mu = k/d.
inline void simplex_grid(std::size_t n, int d, std::vector<Vec>& out) {
  Vec k(n, 1.0);
  std::function<void(std::size_t, int)> rec = [&](std::size_t i, int rem) {
    if (i + 1 == n) {
      k[i] = rem;
      Vec mu(n);
      for (std::size_t j = 0; j < n; ++j) mu[j] = k[j] / d;
      out.push_back(std::move(mu));
      return;
    }
    for (int v = 1; rem - v >= static_cast<int>(n - i - 1); ++v) {
      k[i] = v;
      rec(i + 1, rem - v);
    }
  };
  rec(0, d);
}
}  // namespace detail

// Grid diagnostics for the three parts of the boundedness assumption. Part 3
// is the Stieltjes cross condition: moving toward one state must not lower
// the divergence to any other, i.e. (e_t - mu)' Hess H(mu) (e_t' - mu) <= 0
// off-diagonal. Advisory for custom models.
inline Assumption1Report assumption1_report(const EntropyModel& model, int grid_density,
                                            std::size_t n = 2) {
  if (grid_density < 10) throw validation_error("assumption1_report needs grid_density >= 10");
  std::vector<Vec> grid;
  detail::simplex_grid(n, grid_density, grid);
  Assumption1Report rep;
  rep.grid_points = static_cast<int>(grid.size());
  rep.sup_min_divergence = 0.0;
  for (const Vec& p : grid) {
    Belief mu(p);
    Vec d(n);
    double dmin = kInf;
    for (std::size_t th = 0; th < n; ++th) {
      d[th] = divergence_to_state(model, th, mu);
      dmin = std::min(dmin, d[th]);
    }
    rep.sup_min_divergence = std::max(rep.sup_min_divergence, dmin);
    for (std::size_t th = 0; th < n; ++th)
      if (d[th] <= dmin + 1e-12) rep.min_closest_prob = std::min(rep.min_closest_prob, p[th]);
    Mat h = model.hessian(mu);
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) {
        if (a == b) continue;
        double q = 0.0;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < n; ++j) {
            double ea = (i == a ? 1.0 : 0.0) - p[i];
            double eb = (j == b ? 1.0 : 0.0) - p[j];
            q += ea * h(i, j) * eb;
          }
        rep.max_cross_term = std::max(rep.max_cross_term, q);
      }
  }
  rep.part1_pass = std::isfinite(rep.sup_min_divergence);
  rep.part2_pass = rep.min_closest_prob >= 1e-3;
  rep.part3_pass = rep.max_cross_term <= 1e-9;
  rep.pass = rep.part1_pass && rep.part2_pass && rep.part3_pass;
  return rep;
}

}  // namespace tokenscreen

#endif
