#pragma once

#include <cmath>

namespace bolo {

inline constexpr double kSqrt2 = 1.4142135623730951;
inline constexpr double kSqrt2Pi = 2.5066282746310002;

inline double normal_pdf(double x, double mean, double sigma) {
  const double z = (x - mean) / sigma;
  return std::exp(-0.5 * z * z) / (sigma * kSqrt2Pi);
}

inline double normal_cdf(double x, double mean, double sigma) {
  // erfc keeps precision in the far lower tail where erf saturates.
  return 0.5 * std::erfc(-(x - mean) / (sigma * kSqrt2));
}

// Inverse of erf on (-1, 1), accurate to ~1 ulp: a polynomial seed followed by
// Newton iterations on erf(y) - x (the derivative 2/sqrt(pi)*exp(-y^2) is
// cheap and exact).
double erf_inv(double x);

} // namespace bolo
