#include "bolosim/signal_proc.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "bolosim/fidelity.hpp"

namespace bolo {

namespace {
constexpr double kPi = std::numbers::pi;
}

Eigen::ArrayXd synthesize_tone(double amplitude_mV, double f_if_MHz,
                               double sample_rate_MSps, double duration_us,
                               double phase_rad) {
  if (!(sample_rate_MSps > 0.0) || !(duration_us > 0.0))
    throw std::invalid_argument("synthesize_tone: rate and duration must be > 0");
  const auto n = static_cast<Eigen::Index>(std::llround(duration_us * sample_rate_MSps));
  if (n < 1) throw std::invalid_argument("synthesize_tone: empty grid");
  const double dt = 1.0 / sample_rate_MSps; // MS/s == samples per us
  Eigen::ArrayXd t = Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1)) * dt;
  // f in MHz and t in us keep the phase dimensionless with no unit factor.
  return amplitude_mV * (2.0 * kPi * f_if_MHz * t + phase_rad).cos();
}

IqTrace digital_demodulate(const Eigen::ArrayXd& if_samples, double f_if_MHz,
                           double sample_rate_MSps) {
  if (if_samples.size() == 0)
    throw std::invalid_argument("digital_demodulate: empty input");
  if (!(sample_rate_MSps > 2.0 * f_if_MHz))
    throw std::invalid_argument("digital_demodulate: sample rate must exceed 2*f_IF");

  const double dt = 1.0 / sample_rate_MSps;
  const auto n = if_samples.size();
  // f in MHz, t in us: the phase 2*pi*f*t needs no unit conversion.
  Eigen::ArrayXd phase =
      2.0 * kPi * f_if_MHz * dt *
      Eigen::ArrayXd::LinSpaced(n, 0.0, static_cast<double>(n - 1));
  Eigen::ArrayXd i_raw = if_samples * phase.cos();
  Eigen::ArrayXd q_raw = -if_samples * phase.sin();

  // One nominal IF period of boxcar smoothing. With a non-integer number of
  // samples per period (e.g. 250/70.3125 = 32/9) the 2f image is attenuated,
  // not nulled; averaging I/Q over a settled stretch removes the residual
  // ripple, which is zero-mean over whole periods.
  const int box = std::max<int>(1, static_cast<int>(std::llround(sample_rate_MSps / f_if_MHz)));
  IqTrace out;
  out.dt_us = dt;
  out.samples.resize(n, 2);
  double acc_i = 0.0, acc_q = 0.0;
  for (Eigen::Index k = 0; k < n; ++k) {
    acc_i += i_raw[k];
    acc_q += q_raw[k];
    if (k >= box) {
      acc_i -= i_raw[k - box];
      acc_q -= q_raw[k - box];
    }
    const double len = static_cast<double>(std::min<Eigen::Index>(k + 1, box));
    out.samples(k, 0) = acc_i / len;
    out.samples(k, 1) = acc_q / len;
  }
  return out;
}

IqTrace boxcar_downsample(const IqTrace& trace, int n) {
  trace.validate();
  if (n < 1) throw std::invalid_argument("boxcar_downsample: n must be >= 1");
  const Eigen::Index blocks = trace.samples.rows() / n;
  if (blocks == 0)
    throw std::invalid_argument("boxcar_downsample: fewer samples than one block");
  IqTrace out;
  out.dt_us = trace.dt_us * n;
  out.samples.resize(blocks, 2);
  for (Eigen::Index b = 0; b < blocks; ++b)
    out.samples.row(b) = trace.samples.middleRows(b * n, n).colwise().mean();
  return out;
}

Trace boxcar_downsample(const Trace& trace, int n) {
  trace.validate();
  if (n < 1) throw std::invalid_argument("boxcar_downsample: n must be >= 1");
  const Eigen::Index blocks = trace.samples.size() / n;
  if (blocks == 0)
    throw std::invalid_argument("boxcar_downsample: fewer samples than one block");
  Trace out;
  out.dt_us = trace.dt_us * n;
  out.t_pulse_start_us = trace.t_pulse_start_us;
  out.samples.resize(blocks);
  for (Eigen::Index b = 0; b < blocks; ++b)
    out.samples[b] = trace.samples.segment(b * n, n).mean();
  return out;
}

Eigen::ArrayX2d rotate(const Eigen::ArrayX2d& points, double angle_rad) {
  const double c = std::cos(angle_rad), s = std::sin(angle_rad);
  Eigen::ArrayX2d out(points.rows(), 2);
  out.col(0) = points.col(0) * c - points.col(1) * s;
  out.col(1) = points.col(0) * s + points.col(1) * c;
  return out;
}

IqTrace rotate(const IqTrace& trace, double angle_rad) {
  IqTrace out;
  out.dt_us = trace.dt_us;
  out.samples = rotate(trace.samples, angle_rad);
  return out;
}

namespace {

double rotated_fidelity(const Eigen::ArrayX2d& g, const Eigen::ArrayX2d& e,
                        double angle) {
  const double c = std::cos(angle), s = std::sin(angle);
  Eigen::ArrayXd gi = g.col(0) * c - g.col(1) * s;
  Eigen::ArrayXd ei = e.col(0) * c - e.col(1) * s;
  return optimal_threshold(gi, ei).fidelity;
}

} // namespace

RotationFit fit_common_rotation(const Eigen::ArrayX2d& shots_g,
                                const Eigen::ArrayX2d& shots_e) {
  if (shots_g.rows() == 0 || shots_e.rows() == 0)
    throw std::invalid_argument("fit_common_rotation: empty point set");

  RotationFit fit;
  if (shots_g.rows() == shots_e.rows() &&
      ((shots_g - shots_e).abs().maxCoeff() == 0.0)) {
    // Identical clouds carry no discriminating direction.
    fit.degenerate = true;
    fit.fidelity = rotated_fidelity(shots_g, shots_e, 0.0);
    return fit;
  }

  // Coarse scan to bracket the best angle (the objective is piecewise
  // constant and pi-periodic, so a global scan has to come first).
  constexpr int kScan = 128;
  double best_angle = -kPi;
  double best_f = -1.0;
  for (int k = 0; k < kScan; ++k) {
    const double a = -kPi + (2.0 * kPi * k) / kScan;
    const double f = rotated_fidelity(shots_g, shots_e, a);
    if (f > best_f) {
      best_f = f;
      best_angle = a;
    }
  }

  // Golden-section refinement inside the bracketing cell.
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double lo = best_angle - 2.0 * kPi / kScan;
  double hi = best_angle + 2.0 * kPi / kScan;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = rotated_fidelity(shots_g, shots_e, x1);
  double f2 = rotated_fidelity(shots_g, shots_e, x2);
  while (hi - lo > 1e-4) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = rotated_fidelity(shots_g, shots_e, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = rotated_fidelity(shots_g, shots_e, x1);
    }
  }
  double angle = 0.5 * (lo + hi);
  double f_refined = rotated_fidelity(shots_g, shots_e, angle);
  if (f_refined < best_f) {
    angle = best_angle;
    f_refined = best_f;
  }
  // Normalize into [-pi, pi).
  while (angle >= kPi) angle -= 2.0 * kPi;
  while (angle < -kPi) angle += 2.0 * kPi;

  fit.angle_rad = angle;
  fit.fidelity = f_refined;
  return fit;
}

} // namespace bolo
