#pragma once

#include <Eigen/Core>

#include "bolosim/trace_sim.hpp"

namespace bolo {

// Demodulated receiver output: column 0 is I, column 1 is Q (both mV).
struct IqTrace {
  double dt_us = 0.0;
  Eigen::ArrayX2d samples;

  void validate() const {
    if (!(dt_us > 0.0)) throw std::invalid_argument("IqTrace: dt must be > 0");
    if (samples.rows() == 0) throw std::invalid_argument("IqTrace: samples empty");
    if (!samples.isFinite().all())
      throw std::invalid_argument("IqTrace: samples must be finite");
  }
};

// Synthesizes A*cos(2*pi*f_IF*t + phase) on the given sample grid; test and
// demo input for digital_demodulate.
Eigen::ArrayXd synthesize_tone(double amplitude_mV, double f_if_MHz,
                               double sample_rate_MSps, double duration_us,
                               double phase_rad = 0.0);

// Mixes the raw trace with cos/-sin at f_IF and low-pass filters with a boxcar
// spanning one nominal IF period. A pure tone A*cos(2*pi*f_IF*t + phi) maps to
// (I, Q) ~ (A/2*cos(phi), A/2*sin(phi)) after the filter settles. The first
// boxcar-length samples are the settling interval.
IqTrace digital_demodulate(const Eigen::ArrayXd& if_samples, double f_if_MHz,
                           double sample_rate_MSps);

// Averages disjoint blocks of n samples; dt grows n-fold; a trailing partial
// block is dropped.
IqTrace boxcar_downsample(const IqTrace& trace, int n);
Trace boxcar_downsample(const Trace& trace, int n);

// Rigid rotation in the IQ plane.
Eigen::ArrayX2d rotate(const Eigen::ArrayX2d& points, double angle_rad);
IqTrace rotate(const IqTrace& trace, double angle_rad);

struct RotationFit {
  double angle_rad = 0.0;
  double fidelity = 0.0;  // optimal-threshold fidelity of the rotated I components
  bool degenerate = false;
};

// Finds the common rotation angle that maximizes the optimal-threshold
// fidelity of the rotated I components of the two shot clouds. The objective
// is pi-periodic (the threshold scan handles either cluster orientation), so a
// coarse scan brackets the optimum and golden-section refines it to 1e-4 rad.
RotationFit fit_common_rotation(const Eigen::ArrayX2d& shots_g,
                                const Eigen::ArrayX2d& shots_e);

} // namespace bolo
