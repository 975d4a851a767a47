#pragma once

#include <cmath>
#include <stdexcept>
#include <string>

namespace bolo {

// Deterministic detector response: the bolometer's electron temperature relaxes
// exponentially (thermal time constant tau_b) toward a steady state set by the
// qubit state. All voltages are baseline-subtracted, in mV; times in us.
struct BolometerResponse {
  double c_g_mV = 0.0;   // steady-state level with the qubit in the ground state
  double c_e_mV = 0.0;   // steady-state level with the qubit in the excited state
  double tau_b_us = 0.0; // thermal time constant

  void validate() const {
    if (!(tau_b_us > 0.0))
      throw std::invalid_argument("BolometerResponse: tau_b must be > 0");
    if (!std::isfinite(c_g_mV) || !std::isfinite(c_e_mV))
      throw std::invalid_argument("BolometerResponse: amplitudes must be finite");
    // No ordering constraint between c_g and c_e: fits must not assume c_e > c_g.
  }
};

// Qubit relaxation during readout plus the chance that the nominally excited
// qubit is already in the ground state when the pulse starts (preparation
// error and pre-readout decay folded together).
struct QubitDecayModel {
  double t1_us = 0.0; // energy relaxation time
  double p_x = 0.0;   // probability of starting in the ground state

  void validate() const {
    if (!(t1_us > 0.0))
      throw std::invalid_argument("QubitDecayModel: T1 must be > 0");
    if (!(p_x >= 0.0 && p_x <= 1.0))
      throw std::invalid_argument("QubitDecayModel: P_x must be in [0, 1]");
  }
};

// Integration window for the scalar signal: the voltage is averaged over
// [t0, t_RO] measured from pulse onset. t_base is the length of the per-shot
// baseline window immediately preceding the pulse; 0 selects common-baseline
// operation.
struct AveragingWindow {
  double t_ro_us = 0.0;   // readout pulse length / window end
  double t0_us = 0.0;     // averaging start
  double t_base_us = 0.0; // per-shot baseline duration (0 = common baseline)

  double length_us() const { return t_ro_us - t0_us; }

  void validate() const {
    if (!(t0_us >= 0.0 && t0_us < t_ro_us))
      throw std::invalid_argument("AveragingWindow: require 0 <= t0 < t_RO");
    if (!(t_base_us >= 0.0))
      throw std::invalid_argument("AveragingWindow: t_base must be >= 0");
  }
};

// White-noise model for the demodulated detector output. P_N is the one-sided
// power spectral density in mV^2*us; a boxcar average over a window of length
// T then has standard deviation sqrt(P_N / T).
struct NoiseModel {
  double psd_mV2us = 0.0;

  void validate() const {
    if (!(psd_mV2us >= 0.0))
      throw std::invalid_argument("NoiseModel: P_N must be >= 0");
  }
};

// Provenance labels describing the hardware operating point. Never used in any
// computation; carried through configs and results documents verbatim.
struct ExperimentMetadata {
  double f_d_GHz = 0.0;  // qubit drive frequency
  double p_d_dBm = 0.0;  // qubit drive power
  double f_p_MHz = 0.0;  // bolometer probe frequency
  double p_p_dBm = 0.0;  // bolometer probe power
  std::string annotations;
};

} // namespace bolo
