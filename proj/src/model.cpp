#include "bolosim/model.hpp"

#include <cmath>
#include <stdexcept>

namespace bolo {

namespace {

// Mean of c * (1 - exp(-t / tau)) over [a, b]:
//   c * [1 - tau * (exp(-a/tau) - exp(-b/tau)) / (b - a)].
double rise_mean(double c, double tau, double a, double b) {
  return c * (1.0 - tau * (std::exp(-a / tau) - std::exp(-b / tau)) / (b - a));
}

} // namespace

double noiseless_response_ground(double t_us, const BolometerResponse& resp) {
  resp.validate();
  if (!(t_us >= 0.0))
    throw std::invalid_argument("noiseless_response_ground: t must be >= 0");
  return resp.c_g_mV * (1.0 - std::exp(-t_us / resp.tau_b_us));
}

Eigen::ArrayXd noiseless_response_ground(const Eigen::ArrayXd& t_us,
                                         const BolometerResponse& resp) {
  resp.validate();
  if ((t_us < 0.0).any())
    throw std::invalid_argument("noiseless_response_ground: t must be >= 0");
  return resp.c_g_mV * (1.0 - (-t_us / resp.tau_b_us).exp());
}

double noiseless_response_excited(double t_us, double t_d_us,
                                  const BolometerResponse& resp) {
  resp.validate();
  if (!(t_us >= 0.0) || !(t_d_us >= 0.0))
    throw std::invalid_argument("noiseless_response_excited: t and t_d must be >= 0");
  const double tau = resp.tau_b_us;
  if (t_us < t_d_us) return resp.c_e_mV * (1.0 - std::exp(-t_us / tau));
  const double c_e_at_decay = resp.c_e_mV * (1.0 - std::exp(-t_d_us / tau));
  return (resp.c_g_mV - c_e_at_decay) * (1.0 - std::exp(-(t_us - t_d_us) / tau)) +
         c_e_at_decay;
}

Eigen::ArrayXd noiseless_response_excited(const Eigen::ArrayXd& t_us,
                                          double t_d_us,
                                          const BolometerResponse& resp) {
  resp.validate();
  if ((t_us < 0.0).any() || !(t_d_us >= 0.0))
    throw std::invalid_argument("noiseless_response_excited: t and t_d must be >= 0");
  const double tau = resp.tau_b_us;
  const double c_e_at_decay = resp.c_e_mV * (1.0 - std::exp(-t_d_us / tau));
  const Eigen::ArrayXd before = resp.c_e_mV * (1.0 - (-t_us / tau).exp());
  const Eigen::ArrayXd after =
      (resp.c_g_mV - c_e_at_decay) * (1.0 - (-(t_us - t_d_us) / tau).exp()) +
      c_e_at_decay;
  return (t_us < t_d_us).select(before, after);
}

double window_mean_ground(const AveragingWindow& win,
                          const BolometerResponse& resp) {
  win.validate();
  resp.validate();
  return rise_mean(resp.c_g_mV, resp.tau_b_us, win.t0_us, win.t_ro_us);
}

double window_mean_excited(const AveragingWindow& win,
                           const BolometerResponse& resp, double t_d_us) {
  win.validate();
  resp.validate();
  if (!(t_d_us >= 0.0))
    throw std::invalid_argument("window_mean_excited: t_d must be >= 0");
  const double tau = resp.tau_b_us;
  const double t0 = win.t0_us, t_ro = win.t_ro_us;

  // Decay after the window end cannot affect the mean.
  if (t_d_us >= t_ro) return rise_mean(resp.c_e_mV, tau, t0, t_ro);

  const double c_e_at_decay = resp.c_e_mV * (1.0 - std::exp(-t_d_us / tau));
  if (t_d_us <= t0) {
    // Entire window lies in the re-relaxation branch; shift time to the decay
    // instant where that branch is a plain exponential rise plus an offset.
    return rise_mean(resp.c_g_mV - c_e_at_decay, tau, t0 - t_d_us, t_ro - t_d_us) +
           c_e_at_decay;
  }
  // Decay falls inside the window: integrate both branches and divide by the
  // window length.
  const double pre =
      resp.c_e_mV *
      ((t_d_us - t0) - tau * (std::exp(-t0 / tau) - std::exp(-t_d_us / tau)));
  const double post =
      (resp.c_g_mV - c_e_at_decay) *
          ((t_ro - t_d_us) - tau * (1.0 - std::exp(-(t_ro - t_d_us) / tau))) +
      c_e_at_decay * (t_ro - t_d_us);
  return (pre + post) / win.length_us();
}

double window_sigma(const AveragingWindow& win, const NoiseModel& noise) {
  win.validate();
  noise.validate();
  return std::sqrt(noise.psd_mV2us / win.length_us());
}

double noise_psd_for_sigma(double sigma_mV, double window_length_us) {
  if (!(sigma_mV >= 0.0) || !(window_length_us > 0.0))
    throw std::invalid_argument(
        "noise_psd_for_sigma: require sigma >= 0 and window length > 0");
  return sigma_mV * sigma_mV * window_length_us;
}

} // namespace bolo
