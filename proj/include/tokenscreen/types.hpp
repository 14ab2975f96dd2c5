#ifndef TOKENSCREEN_TYPES_HPP
#define TOKENSCREEN_TYPES_HPP

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace tokenscreen {

using Vec = std::vector<double>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Interiority floor for beliefs fed to divergences/Hessians. Callers clip
// paths at delta_int; the model evaluators themselves reject anything below
// kBoundaryFloor.
inline constexpr double kDeltaInt = 1e-9;
inline constexpr double kBoundaryFloor = 1e-10;

// Thrown on bad domain inputs (priors off the simplex, negative rates, ...).
// The CLI maps this to exit code 1.
struct validation_error : std::runtime_error {
  explicit validation_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown when a numerical certificate fails (capacity violated, FOC residual
// too large, ...). CLI exit code 2.
struct certificate_error : std::runtime_error {
  explicit certificate_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Thrown on malformed run configuration. CLI exit code 3.
struct config_error : std::runtime_error {
  explicit config_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sum(const Vec& a) {
  double s = 0.0;
  for (double x : a) s += x;
  return s;
}

// A belief is a point on the probability simplex. Validated on construction:
// components nonnegative, summing to one within 1e-12.
class Belief {
 public:
  explicit Belief(Vec probs) : p_(std::move(probs)) {
    if (p_.size() < 2) throw validation_error("belief needs at least 2 states");
    double s = 0.0;
    for (double x : p_) {
      if (!(x >= 0.0)) throw validation_error("belief component negative or NaN");
      s += x;
    }
    if (std::abs(s - 1.0) > 1e-12)
      throw validation_error("belief components sum to " + std::to_string(s) + ", not 1");
  }

  // Binary convenience constructor from P(state 1).
  static Belief binary(double m1) { return Belief(Vec{1.0 - m1, m1}); }

  const Vec& probs() const { return p_; }
  double operator[](std::size_t i) const { return p_[i]; }
  std::size_t size() const { return p_.size(); }

  double min_component() const {
    double m = p_[0];
    for (double x : p_) m = std::min(m, x);
    return m;
  }
  bool interior(double floor = kBoundaryFloor) const { return min_component() >= floor; }

  // Vertex e_theta.
  static Belief vertex(std::size_t n, std::size_t theta) {
    Vec v(n, 0.0);
    v[theta] = 1.0;
    return Belief(std::move(v));
  }

 private:
  Vec p_;
};

}  // namespace tokenscreen

#endif
