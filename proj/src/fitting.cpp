#include "bolosim/fitting.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "bolosim/model.hpp"
#include "bolosim/optim.hpp"
#include "bolosim/special.hpp"

namespace bolo {

namespace {

double logit(double p) { return std::log(p / (1.0 - p)); }
double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Poisson-weighted residual of bin i: (count_i - N * model_prob_i) / sqrt(max(count_i, 1)).
// Zero-count bins stay in the fit; clamping the weight keeps them finite.
template <typename Density>
Eigen::VectorXd histogram_residuals(const Histogram& hist, const Density& density) {
  const double n = static_cast<double>(hist.total());
  Eigen::VectorXd r(hist.n_bins());
  for (int i = 0; i < hist.n_bins(); ++i) {
    const double center = 0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]);
    const double model_prob = density(center) * hist.bin_width(i);
    const double w = std::sqrt(std::max<double>(hist.counts[i], 1.0));
    r[i] = (static_cast<double>(hist.counts[i]) - n * model_prob) / w;
  }
  return r;
}

// Raw histogram moments, used only to seed optimizers.
struct HistMoments {
  double mean = 0.0;
  double sigma = 0.0;
};

HistMoments histogram_moments(const Histogram& hist) {
  double n = 0.0, s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < hist.n_bins(); ++i) {
    const double c = 0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]);
    const double w = static_cast<double>(hist.counts[i]);
    n += w;
    s1 += w * c;
    s2 += w * c * c;
  }
  HistMoments m;
  m.mean = s1 / n;
  m.sigma = std::sqrt(std::max(s2 / n - m.mean * m.mean, 1e-300));
  return m;
}

// The two highest local maxima whose centers are separated by at least
// min_separation. Falls back to the global maximum plus the most distant
// bin when the histogram is effectively unimodal.
struct PeakPair {
  double lo_center = 0.0;
  double hi_center = 0.0;
  bool well_separated = false;
};

PeakPair find_two_peaks(const Histogram& hist, double min_separation) {
  struct Peak {
    double center;
    int count;
  };
  std::vector<Peak> peaks;
  const int nb = hist.n_bins();
  for (int i = 0; i < nb; ++i) {
    const int c = hist.counts[i];
    if (c == 0) continue;
    const int left = (i > 0) ? hist.counts[i - 1] : -1;
    const int right = (i + 1 < nb) ? hist.counts[i + 1] : -1;
    if (c >= left && c >= right)
      peaks.push_back({0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]), c});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const Peak& a, const Peak& b) { return a.count > b.count; });

  PeakPair out;
  if (peaks.empty()) throw std::invalid_argument("histogram has no occupied bins");
  const Peak& first = peaks.front();
  const Peak* second = nullptr;
  for (std::size_t k = 1; k < peaks.size(); ++k) {
    if (std::abs(peaks[k].center - first.center) >= min_separation) {
      second = &peaks[k];
      break;
    }
  }
  if (second != nullptr) {
    out.well_separated = true;
    out.lo_center = std::min(first.center, second->center);
    out.hi_center = std::max(first.center, second->center);
  } else {
    // Unimodal data: spread the seeds across the occupied range so the
    // optimizer can still collapse them if one component suffices.
    const double span = hist.bin_edges[nb] - hist.bin_edges[0];
    out.lo_center = first.center - 0.25 * span;
    out.hi_center = first.center + 0.25 * span;
  }
  return out;
}

double mixture_pdf(double v, double w, double m1, double s1, double m2, double s2) {
  return w * normal_pdf(v, m1, s1) + (1.0 - w) * normal_pdf(v, m2, s2);
}

// Internal parameterization for the mixture: (logit w, m1, log s1, m2, log s2).
// The bounds 0 < w < 1 and s > 0 then hold by construction.
GaussianMixtureParams unpack_mixture(const Eigen::VectorXd& x) {
  GaussianMixtureParams p;
  p.lo.weight = sigmoid(x[0]);
  p.lo.mean_mV = x[1];
  p.lo.sigma_mV = std::exp(x[2]);
  p.hi.weight = 1.0 - p.lo.weight;
  p.hi.mean_mV = x[3];
  p.hi.sigma_mV = std::exp(x[4]);
  if (p.lo.mean_mV > p.hi.mean_mV) {
    std::swap(p.lo, p.hi);
  }
  return p;
}

TwoGaussFitResult finalize_two_gauss(const Eigen::VectorXd& x, double residual_norm,
                                     int iterations, bool converged) {
  TwoGaussFitResult res;
  res.params = unpack_mixture(x);
  res.residual_norm = residual_norm;
  res.iterations = iterations;
  res.converged = converged;
  res.degenerate = std::max(res.params.lo.weight, res.params.hi.weight) >= 0.95;
  return res;
}

Eigen::VectorXd two_gauss_seed(const Histogram& hist) {
  const HistMoments mom = histogram_moments(hist);
  const PeakPair peaks = find_two_peaks(hist, 2.0 * mom.sigma / 3.0);
  const double s0 = std::max(mom.sigma / 3.0, 0.5 * hist.bin_width(0));
  Eigen::VectorXd x(5);
  x << logit(0.5), peaks.lo_center, std::log(s0), peaks.hi_center, std::log(s0);
  return x;
}

// ---- decay-model internals -------------------------------------------------

// Internal parameterization (c_g, c_e, log T1, log sigma, logit P_x); the
// external order everywhere is (c_g, c_e, T1, sigma, P_x).
DecayDistParams unpack_decay(const Eigen::VectorXd& x, const AveragingWindow& win,
                             double tau_b_us) {
  DecayDistParams p;
  p.c_g_mV = x[0];
  p.c_e_mV = x[1];
  p.t1_us = std::exp(std::min(x[2], 40.0)); // cap keeps exp finite
  p.sigma_mV = std::exp(x[3]);
  p.p_x = sigmoid(x[4]);
  p.win = win;
  p.tau_b_us = tau_b_us;
  return p;
}

Eigen::VectorXd decay_seed(const Histogram& hist, const AveragingWindow& win,
                           double tau_b_us, double t1_scale) {
  const HistMoments mom = histogram_moments(hist);
  const PeakPair peaks = find_two_peaks(hist, 2.0 * mom.sigma / 3.0);

  // Window means are linear in the plateau amplitudes, so dividing the peak
  // locations by the unit-amplitude window mean recovers c_g and c_e.
  const BolometerResponse unit{1.0, 1.0, tau_b_us};
  const double k = window_mean_ground(win, unit);

  // Everything below the midpoint is prepared-ground plus early decays; half
  // of it is a serviceable preparation-error seed.
  const double mid = 0.5 * (peaks.lo_center + peaks.hi_center);
  double below = 0.0, total = 0.0;
  for (int i = 0; i < hist.n_bins(); ++i) {
    const double c = 0.5 * (hist.bin_edges[i] + hist.bin_edges[i + 1]);
    total += hist.counts[i];
    if (c < mid) below += hist.counts[i];
  }
  const double p_x0 = std::clamp(0.5 * below / total, 0.01, 0.8);

  Eigen::VectorXd x(5);
  x << peaks.lo_center / k, peaks.hi_center / k, std::log(t1_scale * win.t_ro_us),
      std::log(std::max(0.35 * mom.sigma, 0.5 * hist.bin_width(0))), logit(p_x0);
  return x;
}

DecayFitResult finalize_decay(const LmResult& lm, const AveragingWindow& win,
                              double tau_b_us, double quad_tol) {
  DecayFitResult res;
  res.params = unpack_decay(lm.x, win, tau_b_us);
  res.residual_norm = std::sqrt(2.0 * lm.cost);
  res.iterations = lm.iterations;
  res.converged = lm.converged;
  res.quad_abs_tol = quad_tol;

  // Covariance in external coordinates via the chain rule. Internal
  // covariance is (J^T J)^{-1}; the Jacobian of the transform is diagonal.
  Eigen::MatrixXd cov_int = Eigen::MatrixXd::Constant(5, 5, std::numeric_limits<double>::quiet_NaN());
  Eigen::LDLT<Eigen::MatrixXd> ldlt(lm.jtj);
  if (ldlt.info() == Eigen::Success) {
    cov_int = ldlt.solve(Eigen::MatrixXd::Identity(5, 5));
  }
  Eigen::VectorXd scale(5);
  scale << 1.0, 1.0, res.params.t1_us, res.params.sigma_mV,
      res.params.p_x * (1.0 - res.params.p_x);
  res.covariance = scale.asDiagonal() * cov_int * scale.asDiagonal();

  // T1 flag: variance blown up or not finite, or T1 pushed far beyond the
  // window where the data cannot constrain it.
  const double var_t1 = res.covariance(2, 2);
  res.t1_unidentifiable = !std::isfinite(var_t1) || var_t1 < 0.0 ||
                          std::sqrt(var_t1) > res.params.t1_us ||
                          res.params.t1_us > 50.0 * win.t_ro_us;
  return res;
}

} // namespace

// ---- two-Gaussian mixture --------------------------------------------------

TwoGaussFitResult fit_two_gaussians(const Histogram& hist) {
  hist.validate();
  int occupied = 0;
  for (int i = 0; i < hist.n_bins(); ++i)
    if (hist.counts[i] > 0) ++occupied;
  if (occupied < 6)
    throw std::invalid_argument("two-Gaussian fit needs at least 6 occupied bins");

  auto residual = [&](const Eigen::VectorXd& x) {
    const GaussianMixtureParams p = unpack_mixture(x);
    return histogram_residuals(hist, [&](double v) {
      return mixture_pdf(v, p.lo.weight, p.lo.mean_mV, p.lo.sigma_mV, p.hi.mean_mV,
                         p.hi.sigma_mV);
    });
  };

  const LmResult lm = levenberg_marquardt(residual, two_gauss_seed(hist));
  return finalize_two_gauss(lm.x, std::sqrt(2.0 * lm.cost), lm.iterations,
                            lm.converged);
}

TwoGaussFitResult fit_two_gaussians(const Eigen::ArrayXd& samples, FitMethod method,
                                    double bin_width) {
  const Histogram hist = build_histogram(samples, bin_width);
  if (method == FitMethod::weighted_least_squares) {
    return fit_two_gaussians(hist);
  }

  // Likelihood mode works on the raw samples; the histogram only seeds it.
  auto nll = [&](const Eigen::VectorXd& x) {
    const GaussianMixtureParams p = unpack_mixture(x);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      const double f = mixture_pdf(samples[i], p.lo.weight, p.lo.mean_mV,
                                   p.lo.sigma_mV, p.hi.mean_mV, p.hi.sigma_mV);
      acc -= std::log(std::max(f, 1e-300));
    }
    return acc;
  };
  const NelderMeadResult nm = nelder_mead(nll, two_gauss_seed(hist));
  TwoGaussFitResult res =
      finalize_two_gauss(nm.x, 0.0, nm.iterations, nm.converged);

  // Report the histogram-space residual so the two modes are comparable.
  const GaussianMixtureParams p = res.params;
  res.residual_norm = histogram_residuals(hist, [&](double v) {
                        return mixture_pdf(v, p.lo.weight, p.lo.mean_mV,
                                           p.lo.sigma_mV, p.hi.mean_mV,
                                           p.hi.sigma_mV);
                      }).norm();
  return res;
}

// ---- decay-model fit -------------------------------------------------------

DecayFitResult fit_decay_model(const Histogram& hist, const AveragingWindow& win,
                               double tau_b_us) {
  hist.validate();
  win.validate();
  if (!(tau_b_us > 0.0)) throw std::invalid_argument("tau_b_us must be positive");

  // Quadrature tolerance for the decay marginal during fitting. Bin
  // probabilities sit around 1e-2, so 1e-9 is far below the statistical
  // noise while keeping each evaluation cheap.
  const double quad_tol = 1e-9;

  auto residual = [&](const Eigen::VectorXd& x) {
    const DecayDistParams p = unpack_decay(x, win, tau_b_us);
    return histogram_residuals(
        hist, [&](double v) { return pdf_excited_total(v, p, quad_tol); });
  };

  // Multi-start on the T1 seed: the decay tail is the one feature a local
  // optimizer can miss when the seed is far off.
  LmResult best;
  best.cost = std::numeric_limits<double>::infinity();
  int total_iterations = 0;
  for (const double t1_scale : {1.5, 0.5, 4.0}) {
    LmOptions opts;
    opts.max_iterations = 120;
    const LmResult lm = levenberg_marquardt(
        residual, decay_seed(hist, win, tau_b_us, t1_scale), opts);
    total_iterations += lm.iterations;
    if (lm.cost < best.cost) best = lm;
    if (best.converged && best.cost < 2.0 * hist.n_bins()) break; // good fit already
  }
  DecayFitResult res = finalize_decay(best, win, tau_b_us, quad_tol);
  res.iterations = total_iterations;
  return res;
}

DecayFitResult fit_decay_model(const Eigen::ArrayXd& samples,
                               const AveragingWindow& win, double tau_b_us,
                               FitMethod method, double bin_width) {
  const Histogram hist = build_histogram(samples, bin_width);
  if (method == FitMethod::weighted_least_squares) {
    return fit_decay_model(hist, win, tau_b_us);
  }

  const double quad_tol = 1e-9;
  auto nll = [&](const Eigen::VectorXd& x) {
    const DecayDistParams p = unpack_decay(x, win, tau_b_us);
    double acc = 0.0;
    for (Eigen::Index i = 0; i < samples.size(); ++i) {
      acc -= std::log(std::max(pdf_excited_total(samples[i], p, quad_tol), 1e-300));
    }
    return acc;
  };
  NelderMeadOptions opts;
  opts.max_iterations = 600;
  const NelderMeadResult nm =
      nelder_mead(nll, decay_seed(hist, win, tau_b_us, 1.5), opts);

  LmResult shim;
  shim.x = nm.x;
  shim.cost = 0.0;
  shim.iterations = nm.iterations;
  shim.converged = nm.converged;
  shim.jtj = Eigen::MatrixXd::Constant(5, 5, std::numeric_limits<double>::quiet_NaN());
  DecayFitResult res = finalize_decay(shim, win, tau_b_us, quad_tol);

  // No curvature information from Nelder-Mead: judge T1 by magnitude only
  // and report the histogram-space residual for comparability.
  res.t1_unidentifiable = res.params.t1_us > 50.0 * win.t_ro_us;
  res.covariance.resize(0, 0);
  const DecayDistParams p = res.params;
  res.residual_norm =
      histogram_residuals(hist, [&](double v) { return pdf_excited_total(v, p, quad_tol); })
          .norm();
  return res;
}

// ---- exponential rise ------------------------------------------------------

ExpRiseFitResult fit_exponential_rise(const Trace& trace) {
  trace.validate();
  const Eigen::Index n_total = trace.samples.size();
  std::vector<double> ts, ys;
  ts.reserve(static_cast<std::size_t>(n_total));
  ys.reserve(static_cast<std::size_t>(n_total));
  for (Eigen::Index k = 0; k < n_total; ++k) {
    const double t = (static_cast<double>(k) + 0.5) * trace.dt_us;
    if (t >= trace.t_pulse_start_us) {
      ts.push_back(t - trace.t_pulse_start_us);
      ys.push_back(trace.samples[k]);
    }
  }
  const int n = static_cast<int>(ts.size());
  if (n < 4) throw std::invalid_argument("too few post-onset samples for a rise fit");

  ExpRiseFitResult res;
  const auto [mn, mx] = std::minmax_element(ys.begin(), ys.end());
  if (*mx - *mn == 0.0) {
    // Exactly constant trace: no rise to fit.
    res.amplitude_mV = 0.0;
    res.offset_mV = ys.front();
    res.tau_us = 0.0;
    res.converged = true;
    res.tau_unidentifiable = true;
    return res;
  }

  // Seeds: offset from the earliest samples, amplitude from the latest,
  // tau from the 63.2% crossing of a lightly smoothed trace.
  const int head = std::max(3, n / 50);
  const int tail = std::max(3, n / 10);
  double b0 = 0.0, plateau = 0.0;
  for (int i = 0; i < head; ++i) b0 += ys[static_cast<std::size_t>(i)];
  b0 /= head;
  for (int i = n - tail; i < n; ++i) plateau += ys[static_cast<std::size_t>(i)];
  plateau /= tail;
  const double a0 = plateau - b0;

  const int smooth = std::max(1, n / 100);
  double tau0 = ts.back() / 5.0;
  const double target = b0 + 0.632 * a0;
  for (int i = 0; i + smooth <= n; i += smooth) {
    double block = 0.0;
    for (int j = i; j < i + smooth; ++j) block += ys[static_cast<std::size_t>(j)];
    block /= smooth;
    if ((a0 > 0.0) ? (block >= target) : (block <= target)) {
      tau0 = std::max(ts[static_cast<std::size_t>(i)], trace.dt_us);
      break;
    }
  }

  auto residual = [&](const Eigen::VectorXd& x) {
    const double a = x[0], tau = std::exp(x[1]), b = x[2];
    Eigen::VectorXd r(n);
    for (int i = 0; i < n; ++i) {
      const double model =
          a * (1.0 - std::exp(-ts[static_cast<std::size_t>(i)] / tau)) + b;
      r[i] = ys[static_cast<std::size_t>(i)] - model;
    }
    return r;
  };
  Eigen::VectorXd x0(3);
  x0 << a0, std::log(tau0), b0;
  const LmResult lm = levenberg_marquardt(residual, x0);

  res.amplitude_mV = lm.x[0];
  res.tau_us = std::exp(lm.x[1]);
  res.offset_mV = lm.x[2];
  res.residual_norm = std::sqrt(2.0 * lm.cost);
  res.iterations = lm.iterations;
  res.converged = lm.converged;
  res.insufficient_span = ts.back() < 3.0 * res.tau_us;

  // If the fitted amplitude is consistent with zero at the residual noise
  // level, tau carries no information.
  const double noise_rms = res.residual_norm / std::sqrt(static_cast<double>(n));
  res.tau_unidentifiable = std::abs(res.amplitude_mV) < 5.0 * noise_rms / std::sqrt(static_cast<double>(n));
  return res;
}

GaussianFit fit_single_gaussian(const Eigen::ArrayXd& samples) {
  if (samples.size() < 2)
    throw std::invalid_argument("need at least 2 samples for a Gaussian fit");
  GaussianFit f;
  f.mean_mV = samples.mean();
  f.sigma_mV = std::sqrt((samples - f.mean_mV).square().sum() /
                         static_cast<double>(samples.size() - 1));
  return f;
}

} // namespace bolo
