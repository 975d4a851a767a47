#pragma once

#include "bolosim/types.hpp"

namespace bolo {

// The five fitted distribution parameters plus the fixed context (window and
// thermal time constant) they are conditioned on.
struct DecayDistParams {
  double c_g_mV = 0.0;
  double c_e_mV = 0.0;
  double t1_us = 0.0;
  double sigma_mV = 0.0;
  double p_x = 0.0;
  AveragingWindow win;
  double tau_b_us = 0.0;

  BolometerResponse response() const { return {c_g_mV, c_e_mV, tau_b_us}; }

  void validate() const {
    if (!(sigma_mV > 0.0))
      throw std::invalid_argument("DecayDistParams: sigma must be > 0");
    if (!(t1_us > 0.0)) throw std::invalid_argument("DecayDistParams: T1 must be > 0");
    if (!(p_x >= 0.0 && p_x <= 1.0))
      throw std::invalid_argument("DecayDistParams: P_x must be in [0, 1]");
    win.validate();
    response().validate();
  }
};

// Signal distribution for a ground-state shot: a Gaussian at the ground
// window mean with width sigma.
double pdf_ground(double v_mV, const DecayDistParams& p);
double cdf_ground(double v_mV, const DecayDistParams& p);

// Signal distribution conditioned on the decay happening at t_d.
double pdf_excited_conditional(double v_mV, double t_d_us, const DecayDistParams& p);

// Decay-time marginal: integral of the conditional density against the
// exponential decay-time density. Evaluated as adaptive quadrature over
// [0, t_RO] plus the exact tail exp(-t_RO/T1) * Gaussian(no-decay mean) —
// beyond the window end the conditional no longer depends on t_d.
double pdf_excited_marginal(double v_mV, const DecayDistParams& p,
                            double abs_tol = 1e-9);
double cdf_excited_marginal(double v_mV, const DecayDistParams& p,
                            double abs_tol = 1e-9);

// Full excited-preparation distribution including preparation error:
// P_x * ground + (1 - P_x) * marginal.
double pdf_excited_total(double v_mV, const DecayDistParams& p,
                         double abs_tol = 1e-9);
double cdf_excited_total(double v_mV, const DecayDistParams& p,
                         double abs_tol = 1e-9);

} // namespace bolo
