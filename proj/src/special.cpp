#include "bolosim/special.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace bolo {

namespace {

// Short polynomial seed for erf_inv (single-precision quality is plenty; the
// safeguarded Newton below does the rest).
double erf_inv_seed(double x) {
  double w = -std::log((1.0 - x) * (1.0 + x));
  double p;
  if (w < 5.0) {
    w -= 2.5;
    p = 2.81022636e-08;
    p = 3.43273939e-07 + p * w;
    p = -3.5233877e-06 + p * w;
    p = -4.39150654e-06 + p * w;
    p = 0.00021858087 + p * w;
    p = -0.00125372503 + p * w;
    p = -0.00417768164 + p * w;
    p = 0.246640727 + p * w;
    p = 1.50140941 + p * w;
  } else {
    w = std::sqrt(w) - 3.0;
    p = -0.000200214257;
    p = 0.000100950558 + p * w;
    p = 0.00134934322 + p * w;
    p = -0.00367342844 + p * w;
    p = 0.00573950773 + p * w;
    p = -0.0076224613 + p * w;
    p = 0.00943887047 + p * w;
    p = 1.00167406 + p * w;
    p = 2.83297682 + p * w;
  }
  return p * x;
}

} // namespace

double erf_inv(double x) {
  if (x == 1.0) return std::numeric_limits<double>::infinity();
  if (x == -1.0) return -std::numeric_limits<double>::infinity();
  if (!(x > -1.0 && x < 1.0))
    throw std::invalid_argument("erf_inv: argument must lie in [-1, 1]");
  if (x == 0.0) return 0.0;

  // Work on |x| and restore the sign at the end; erf is odd.
  const double ax = std::fabs(x);
  double y = std::clamp(erf_inv_seed(ax), 0.0, 7.0);

  // Newton on f(y) = erf(y) - ax with a bisection bracket as a safety net.
  // erf is monotone, so the bracket always contains the root. erf_inv of the
  // largest double below 1 is ~5.86, hence the initial upper bound.
  double lo = 0.0, hi = 6.5;
  const double two_over_sqrt_pi = 1.1283791670955126;
  for (int i = 0; i < 100; ++i) {
    const double err = std::erf(y) - ax;
    if (err > 0.0)
      hi = y;
    else
      lo = y;
    const double step = err / (two_over_sqrt_pi * std::exp(-y * y));
    double next = y - step;
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == y || std::fabs(next - y) < 1e-17 * (1.0 + std::fabs(y))) {
      y = next;
      break;
    }
    y = next;
  }
  return x < 0.0 ? -y : y;
}

} // namespace bolo
