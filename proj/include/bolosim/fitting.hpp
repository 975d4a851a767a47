#pragma once

#include <Eigen/Core>

#include "bolosim/densities.hpp"
#include "bolosim/histogram.hpp"
#include "bolosim/trace_sim.hpp"

namespace bolo {

// Histogram fits minimize Poisson-weighted squared residuals of bin
// probabilities (weights max(count,1)); the raw-sample likelihood mode exists
// as a cross-check and must agree on means to within a couple percent.
enum class FitMethod { weighted_least_squares, max_likelihood };

struct GaussianComponent {
  double weight = 0.0;
  double mean_mV = 0.0;
  double sigma_mV = 0.0;
};

// Two components ordered by mean; weights sum to 1.
struct GaussianMixtureParams {
  GaussianComponent lo;
  GaussianComponent hi;
};

struct TwoGaussFitResult {
  GaussianMixtureParams params;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool degenerate = false; // one component carries >= 0.95 of the weight
};

TwoGaussFitResult fit_two_gaussians(const Histogram& hist);
TwoGaussFitResult fit_two_gaussians(const Eigen::ArrayXd& samples, FitMethod method,
                                    double bin_width = 0.0);

struct DecayFitResult {
  DecayDistParams params;
  Eigen::MatrixXd covariance; // order (c_g, c_e, T1, sigma, P_x); empty for MLE
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool t1_unidentifiable = false; // decay leaves no signature in the window
  double quad_abs_tol = 0.0;
};

// Five-parameter fit of the excited-state signal distribution. The window and
// tau_b are context, not parameters: fitting tau_b alongside T1 is degenerate,
// so it comes from the exponential-rise fit or configuration.
DecayFitResult fit_decay_model(const Histogram& hist, const AveragingWindow& win,
                               double tau_b_us);
DecayFitResult fit_decay_model(const Eigen::ArrayXd& samples,
                               const AveragingWindow& win, double tau_b_us,
                               FitMethod method, double bin_width = 0.0);

struct ExpRiseFitResult {
  double amplitude_mV = 0.0;
  double tau_us = 0.0;
  double offset_mV = 0.0;
  double residual_norm = 0.0;
  int iterations = 0;
  bool converged = false;
  bool insufficient_span = false;  // post-onset span < 3 * fitted tau
  bool tau_unidentifiable = false; // amplitude consistent with zero
};

// Least squares of a*(1 - exp(-(t - t_on)/tau)) + b over the post-onset
// samples of a single trace.
ExpRiseFitResult fit_exponential_rise(const Trace& trace);

// Plain Gaussian by sample moments (the ground-state fit; its sigma is
// reported independently of the excited fit's).
struct GaussianFit {
  double mean_mV = 0.0;
  double sigma_mV = 0.0;
};
GaussianFit fit_single_gaussian(const Eigen::ArrayXd& samples);

} // namespace bolo
