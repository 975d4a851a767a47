#include "bolosim/densities.hpp"

#include <cmath>

#include "bolosim/model.hpp"
#include "bolosim/quadrature.hpp"
#include "bolosim/special.hpp"

namespace bolo {

double pdf_ground(double v_mV, const DecayDistParams& p) {
  p.validate();
  return normal_pdf(v_mV, window_mean_ground(p.win, p.response()), p.sigma_mV);
}

double cdf_ground(double v_mV, const DecayDistParams& p) {
  p.validate();
  return normal_cdf(v_mV, window_mean_ground(p.win, p.response()), p.sigma_mV);
}

double pdf_excited_conditional(double v_mV, double t_d_us, const DecayDistParams& p) {
  p.validate();
  return normal_pdf(v_mV, window_mean_excited(p.win, p.response(), t_d_us),
                    p.sigma_mV);
}

namespace {

// Shared structure of the marginal pdf/cdf: quadrature of kernel(mean(t_d))
// against the decay density over [0, t_RO], plus the exact constant tail.
template <typename Kernel>
double decay_marginal(const DecayDistParams& p, double abs_tol, const Kernel& k) {
  const BolometerResponse resp = p.response();
  const double t_ro = p.win.t_ro_us;
  auto integrand = [&](double t_d) {
    return k(window_mean_excited(p.win, resp, t_d)) *
           std::exp(-t_d / p.t1_us) / p.t1_us;
  };
  const auto q = integrate_adaptive(integrand, 0.0, t_ro, abs_tol, 0.0);
  const double no_decay_mean = window_mean_excited(p.win, resp, t_ro);
  return q.value + std::exp(-t_ro / p.t1_us) * k(no_decay_mean);
}

} // namespace

double pdf_excited_marginal(double v_mV, const DecayDistParams& p, double abs_tol) {
  p.validate();
  return decay_marginal(p, abs_tol, [&](double mean) {
    return normal_pdf(v_mV, mean, p.sigma_mV);
  });
}

double cdf_excited_marginal(double v_mV, const DecayDistParams& p, double abs_tol) {
  p.validate();
  return decay_marginal(p, abs_tol, [&](double mean) {
    return normal_cdf(v_mV, mean, p.sigma_mV);
  });
}

double pdf_excited_total(double v_mV, const DecayDistParams& p, double abs_tol) {
  p.validate();
  return p.p_x * pdf_ground(v_mV, p) +
         (1.0 - p.p_x) * pdf_excited_marginal(v_mV, p, abs_tol);
}

double cdf_excited_total(double v_mV, const DecayDistParams& p, double abs_tol) {
  p.validate();
  return p.p_x * cdf_ground(v_mV, p) +
         (1.0 - p.p_x) * cdf_excited_marginal(v_mV, p, abs_tol);
}

} // namespace bolo
