#pragma once

#include <Eigen/Core>

#include "bolosim/types.hpp"

namespace bolo {

// Noiseless detector voltage with the qubit in the ground state:
// u_g(t) = c_g * (1 - exp(-t / tau_b)), t measured from pulse onset.
double noiseless_response_ground(double t_us, const BolometerResponse& resp);
Eigen::ArrayXd noiseless_response_ground(const Eigen::ArrayXd& t_us,
                                         const BolometerResponse& resp);

// Noiseless detector voltage when the qubit starts excited and relaxes at t_d:
// rises toward c_e until t_d, then re-relaxes toward c_g from the level
// c_e' = c_e * (1 - exp(-t_d / tau_b)) reached at the decay instant.
// Continuous at t = t_d.
double noiseless_response_excited(double t_us, double t_d_us,
                                  const BolometerResponse& resp);
Eigen::ArrayXd noiseless_response_excited(const Eigen::ArrayXd& t_us,
                                          double t_d_us,
                                          const BolometerResponse& resp);

// Mean of u_g over [t0, t_RO] (closed form; validated against quadrature in
// the test suite).
double window_mean_ground(const AveragingWindow& win,
                          const BolometerResponse& resp);

// Mean of u_e(.; t_d) over [t0, t_RO]. Piecewise in t_d: decay after the
// window leaves the no-decay value; decay before t0 shifts the re-relaxation
// into the whole window; otherwise the window integral splits at t_d.
double window_mean_excited(const AveragingWindow& win,
                           const BolometerResponse& resp, double t_d_us);

// Standard deviation of the windowed mean under white noise of density P_N:
// sigma = sqrt(P_N / (t_RO - t0)).
double window_sigma(const AveragingWindow& win, const NoiseModel& noise);

// Inverse of window_sigma: the noise density that produces the given sigma
// over a window of the given length.
double noise_psd_for_sigma(double sigma_mV, double window_length_us);

} // namespace bolo
