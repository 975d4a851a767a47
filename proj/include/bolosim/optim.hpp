#pragma once

#include <Eigen/Core>
#include <functional>

namespace bolo {

struct LmOptions {
  int max_iterations = 200;
  double cost_tol = 1e-12;   // relative cost decrease below which we stop
  double step_tol = 1e-12;   // relative step size below which we stop
  double initial_lambda = 1e-3;
};

struct LmResult {
  Eigen::VectorXd x;
  double cost = 0.0;           // 0.5 * ||r||^2
  int iterations = 0;
  bool converged = false;
  Eigen::MatrixXd jtj;         // J^T J at the solution (for covariance)
};

// Levenberg-Marquardt on a residual vector with a central-difference numeric
// Jacobian. Residuals are expected to be pre-whitened (divided by their
// standard deviations), so (J^T J)^{-1} at the optimum estimates the
// covariance directly.
LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    Eigen::VectorXd x0, const LmOptions& opts = {});

struct NelderMeadOptions {
  int max_iterations = 4000;
  double f_tol = 1e-10;
  double x_tol = 1e-10;
  double initial_step = 0.25; // per-coordinate simplex offset (absolute)
};

struct NelderMeadResult {
  Eigen::VectorXd x;
  double value = 0.0;
  int iterations = 0;
  bool converged = false;
};

// Nelder-Mead minimization (used for the raw-sample likelihood fits where
// residuals do not exist).
NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             Eigen::VectorXd x0, const NelderMeadOptions& opts = {});

// Golden-section maximization of a unimodal function on [lo, hi].
double golden_section_maximize(const std::function<double(double)>& f, double lo,
                               double hi, double x_tol, double* best_value = nullptr);

} // namespace bolo
