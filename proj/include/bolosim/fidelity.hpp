#pragma once

#include <Eigen/Core>
#include <optional>
#include <vector>

#include "bolosim/densities.hpp"
#include "bolosim/trace_sim.hpp"

namespace bolo {

// Outcome of thresholding: assign ground when S < V_th (or the reverse when
// `reversed` is set, which the optimizer selects for inverted-contrast data so
// the reported fidelity stays the achievable one). Always satisfies
// F = 1 - P(g|e) - P(e|g) for the orientation used.
struct ThresholdResult {
  double v_th_mV = 0.0;
  double fidelity = 0.0;
  double p_g_given_e = 0.0;
  double p_e_given_g = 0.0;
  bool reversed = false;
};

// Fixed-threshold empirical fidelity in the standard orientation:
// P(e|g) = fraction of ground shots above V_th, P(g|e) = fraction of excited
// shots at or below V_th. May be negative for inverted data.
ThresholdResult empirical_fidelity(const Eigen::ArrayXd& shots_g,
                                   const Eigen::ArrayXd& shots_e, double v_th_mV);

// Exact maximization of the empirical fidelity by scanning the midpoints of
// the merged sorted sample values (the objective is piecewise constant, so
// the scan is exhaustive). Ties break toward the smallest V_th; both cluster
// orientations are considered and the better one reported via `reversed`.
ThresholdResult optimal_threshold(const Eigen::ArrayXd& shots_g,
                                  const Eigen::ArrayXd& shots_e);

// Model-based fidelity at a fixed threshold, from the ground and total excited
// distribution functions.
ThresholdResult model_fidelity(const DecayDistParams& p, double v_th_mV,
                               double quad_abs_tol = 1e-8);

// Maximizes model_fidelity over the threshold (coarse bracket, golden-section
// refinement; both orientations considered).
ThresholdResult model_optimal_threshold(const DecayDistParams& p,
                                        double quad_abs_tol = 1e-8);

// Two equal-width Gaussians separated by delta_U discriminate with fidelity
// erf(delta_U / (2*sqrt(2)*sigma)) at the midpoint threshold.
double gaussian_snr_fidelity(double delta_u_mV, double sigma_mV);

// Infidelity contributed by relaxation alone: 1 - exp(-t_RO / (2*T1)).
double t1_error(double t_ro_us, double t1_us);

// Post-processing fidelity landscape over (t_RO, averaging-time) cells,
// re-windowing the same traces per cell with t0 = t_RO - averaging_time.
// Infeasible cells (window does not fit) hold NaN.
struct LandscapeGrid {
  Eigen::ArrayXd t_ro_axis_us;
  Eigen::ArrayXd averaging_axis_us;
  Eigen::MatrixXd fidelity; // (i = t_RO index, j = averaging index); NaN absent
  Eigen::MatrixXd v_th_mV;  // optimal threshold per cell; NaN absent
  Eigen::Index max_i = -1;
  Eigen::Index max_j = -1;
  double f_max = 0.0;
  double boundary_level = 0.6;
  std::vector<Eigen::ArrayX2d> boundary; // polylines, columns (t_RO, averaging)
};

LandscapeGrid fidelity_landscape(const std::vector<Trace>& traces_g,
                                 const std::vector<Trace>& traces_e,
                                 const Eigen::ArrayXd& t_ro_axis_us,
                                 const Eigen::ArrayXd& averaging_axis_us,
                                 double common_baseline_mV, int threads = 0,
                                 double boundary_level = 0.6);

// Marching-squares iso-contour of a gridded surface. Squares touching a NaN
// (absent) cell are skipped — the boundary is drawn only where the surface is
// defined on all four corners, so polylines may be open against an absent
// region. Returns polylines in axis coordinates.
std::vector<Eigen::ArrayX2d> extract_contour(const Eigen::ArrayXd& x_axis,
                                             const Eigen::ArrayXd& y_axis,
                                             const Eigen::MatrixXd& values,
                                             double level);

// SNR factor needed to push the Gaussian-overlap infidelity from the baseline
// value to the target: erfinv(1 - target) / erfinv(1 - baseline).
double required_snr_factor(double baseline_overlap_infidelity,
                           double target_infidelity);

struct BudgetFactors {
  double a_t = 1.0;   // readout-drive detuning/power retuning
  double a_c = 1.0;   // qubit-resonator coupling increase
  double a_chi = 1.0; // dispersive-shift operating point
  double a_a = 1.0;   // absorber efficiency
  double a_2f = 1.0;  // two-photon / second-harmonic gain
  double baseline_overlap_infidelity = 0.07;
  double target_infidelity = 0.001;
  double pulse_shortening_ratio = 1.0;  // t_RO now / t_RO target
  double detector_resolution_gain = 1.0;
};

struct BudgetReport {
  double required = 0.0;
  double available = 0.0;
  double margin = 0.0; // available / required
  bool pass = false;
};

// required = snr_factor * pulse_shortening_ratio / detector_resolution_gain,
// available = product of the five hardware factors.
BudgetReport improvement_budget(const BudgetFactors& b);

// The decay-free fidelity is reported two ways because the two obvious
// definitions need not agree on fitted data: (i) the full model with T1
// removed (and P_x zeroed), threshold re-optimized; (ii) the closed-form
// Gaussian overlap of the fitted window means. A reference value may be
// supplied for comparison; the discrepancy flag is raised when the candidates
// disagree with it (or, without a reference, with each other) by more than
// 0.02.
struct DecayFreeFidelityReport {
  double via_model_t1_removed = 0.0;
  double via_gaussian_overlap = 0.0;
  std::optional<double> reference;
  bool discrepancy = false;
};

DecayFreeFidelityReport decay_free_fidelity(const DecayDistParams& fitted,
                                            std::optional<double> reference = std::nullopt);

} // namespace bolo
