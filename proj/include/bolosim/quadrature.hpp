#pragma once

#include <cmath>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace bolo {

// Raised when an integral cannot be driven below the requested tolerance
// within the segment budget. Callers are expected to let this propagate:
// truncating silently would corrupt densities downstream.
class QuadratureError : public std::runtime_error {
 public:
  explicit QuadratureError(const std::string& what) : std::runtime_error(what) {}
};

struct QuadratureResult {
  double value = 0.0;
  double error_estimate = 0.0;
  int segments = 0;
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1]. The 7-point Gauss rule is
// embedded in the 15-point Kronrod rule; their difference estimates the error.
inline constexpr double kGk15Nodes[8] = {
    0.0,
    0.2077849550078985,
    0.4058451513773972,
    0.5860872354676911,
    0.7415311855993944,
    0.8648644233597691,
    0.9491079123427585,
    0.9914553711208126,
};
inline constexpr double kGk15Weights[8] = {
    0.2094821410847278, 0.2044329400752989, 0.1903505780647854,
    0.1690047266392679, 0.1406532597155259, 0.1047900103222502,
    0.0630920926299785, 0.0229353220105292,
};
// Gauss-7 weights for nodes 0, +/-n2, +/-n4, +/-n6 of the table above.
inline constexpr double kG7Weights[4] = {
    0.4179591836734694, 0.3818300505051189, 0.2797053914892767,
    0.1294849661688697,
};

struct Segment {
  double a, b;
  double value;
  double error;
  bool operator<(const Segment& o) const { return error < o.error; }
};

template <typename F>
Segment gk15(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double h = 0.5 * (b - a);
  double kron = 0.0, gauss = 0.0;
  for (int i = 0; i < 8; ++i) {
    const double x = h * kGk15Nodes[i];
    double fsum;
    if (i == 0) {
      fsum = f(c);
    } else {
      fsum = f(c - x) + f(c + x);
    }
    kron += kGk15Weights[i] * fsum;
    if (i % 2 == 0) gauss += kG7Weights[i / 2] * fsum;
  }
  kron *= h;
  gauss *= h;
  if (!std::isfinite(kron))
    throw QuadratureError("integrand returned a non-finite value");
  return Segment{a, b, kron, std::fabs(kron - gauss)};
}

} // namespace detail

// Adaptive quadrature: bisect the segment with the largest error estimate
// until the summed estimate meets max(abs_tol, rel_tol*|integral|). Throws
// QuadratureError when the budget is exhausted or the integrand misbehaves.
template <typename F>
QuadratureResult integrate_adaptive(const F& f, double a, double b,
                                    double abs_tol = 1e-10,
                                    double rel_tol = 1e-10,
                                    int max_segments = 4000) {
  if (!(std::isfinite(a) && std::isfinite(b)))
    throw std::invalid_argument("integrate_adaptive: bounds must be finite");
  if (a > b)
    throw std::invalid_argument("integrate_adaptive: require a <= b");
  if (a == b) return {0.0, 0.0, 0};

  // Seed with several segments so features much narrower than the interval
  // still land near quadrature nodes.
  const int n_seed = std::min(8, std::max(1, max_segments));
  std::priority_queue<detail::Segment> heap;
  double total = 0.0;
  double err = 0.0;
  for (int k = 0; k < n_seed; ++k) {
    const double lo = a + (b - a) * k / n_seed;
    const double hi = (k + 1 == n_seed) ? b : a + (b - a) * (k + 1) / n_seed;
    const detail::Segment seg = detail::gk15(f, lo, hi);
    total += seg.value;
    err += seg.error;
    heap.push(seg);
  }
  int n = n_seed;
  const double min_width = 1e-14 * std::fabs(b - a);

  while (err > std::max(abs_tol, rel_tol * std::fabs(total))) {
    if (n >= max_segments)
      throw QuadratureError("integrate_adaptive: segment budget exhausted (error " +
                            std::to_string(err) + ")");
    const detail::Segment worst = heap.top();
    if (std::fabs(worst.b - worst.a) < min_width)
      throw QuadratureError("integrate_adaptive: segment underflow; integrand too "
                            "singular for the requested tolerance");
    heap.pop();
    const double mid = 0.5 * (worst.a + worst.b);
    const auto left = detail::gk15(f, worst.a, mid);
    const auto right = detail::gk15(f, mid, worst.b);
    total += left.value + right.value - worst.value;
    err += left.error + right.error - worst.error;
    heap.push(left);
    heap.push(right);
    ++n;
  }
  return {total, err, n};
}

} // namespace bolo
