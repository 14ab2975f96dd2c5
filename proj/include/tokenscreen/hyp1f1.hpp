#ifndef TOKENSCREEN_HYP1F1_HPP
#define TOKENSCREEN_HYP1F1_HPP

#include <cmath>

#include "types.hpp"

namespace tokenscreen {
namespace detail {

inline bool nonpositive_integer(double x) {
  return x <= 0.0 && std::rint(x) == x;
}

// power series sum_k (a)_k/(b)_k z^k/k!; all terms positive for a,b,z > 0,
// and for nonpositive integer a the series terminates by itself
inline double kummer_series(double a, double b, double z) {
  double term = 1.0, sum = 1.0;
  for (int k = 0; k < 1000; ++k) {
    term *= (a + k) * z / ((b + k) * (k + 1));
    sum += term;
    if (std::abs(term) <= 1e-14 * std::abs(sum)) return sum;
  }
  throw certificate_error("1F1 series did not converge in 1000 terms");
}

// e^{-z} 1F1(a,b,z) for large positive z: Gamma(b)/Gamma(a) z^{a-b} with the
// first-order correction (b-a)(1-a)/z of the divergent tail expansion
inline double kummer_asymptotic_scaled(double a, double b, double z) {
  return std::tgamma(b) / std::tgamma(a) * std::pow(z, a - b) *
         (1.0 + (b - a) * (1.0 - a) / z);
}

// e^{-z} 1F1(a,b,z), safe for z far beyond the overflow point of e^z
inline double kummer_scaled(double a, double b, double z) {
  if (nonpositive_integer(b)) throw validation_error("1F1 pole: b is a nonpositive integer");
  if (z < 0.0) throw validation_error("1F1 requires z >= 0");
  if (z > 50.0 && a > 0.0) return kummer_asymptotic_scaled(a, b, z);
  return std::exp(-z) * kummer_series(a, b, z);
}

}  // namespace detail

inline double kummer_1f1(double a, double b, double z) {
  if (detail::nonpositive_integer(b)) throw validation_error("1F1 pole: b is a nonpositive integer");
  if (z < 0.0) throw validation_error("1F1 requires z >= 0");
  if (z > 50.0 && a > 0.0)
    return std::exp(z) * detail::kummer_asymptotic_scaled(a, b, z);
  return detail::kummer_series(a, b, z);
}

}  // namespace tokenscreen

#endif
