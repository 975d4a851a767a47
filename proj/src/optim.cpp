#include "bolosim/optim.hpp"

#include <Eigen/Cholesky>
#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

namespace bolo {

namespace {

Eigen::MatrixXd numeric_jacobian(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    const Eigen::VectorXd& x, const Eigen::VectorXd& r0) {
  const auto n = x.size();
  const auto m = r0.size();
  Eigen::MatrixXd jac(m, n);
  // Central differences at cbrt(eps) scale: accurate enough that LM treats the
  // Jacobian as exact.
  for (Eigen::Index j = 0; j < n; ++j) {
    const double h = 6e-6 * std::max(1.0, std::fabs(x[j]));
    Eigen::VectorXd xp = x, xm = x;
    xp[j] += h;
    xm[j] -= h;
    jac.col(j) = (residual(xp) - residual(xm)) / (2.0 * h);
  }
  return jac;
}

} // namespace

LmResult levenberg_marquardt(
    const std::function<Eigen::VectorXd(const Eigen::VectorXd&)>& residual,
    Eigen::VectorXd x0, const LmOptions& opts) {
  LmResult res;
  Eigen::VectorXd x = std::move(x0);
  Eigen::VectorXd r = residual(x);
  double cost = 0.5 * r.squaredNorm();
  double lambda = opts.initial_lambda;

  Eigen::MatrixXd jac = numeric_jacobian(residual, x, r);
  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;
    const Eigen::MatrixXd jtj = jac.transpose() * jac;
    const Eigen::VectorXd jtr = jac.transpose() * r;

    bool stepped = false;
    for (int attempt = 0; attempt < 40; ++attempt) {
      Eigen::MatrixXd damped = jtj;
      damped.diagonal() += lambda * jtj.diagonal().cwiseMax(1e-12);
      const Eigen::VectorXd delta = damped.ldlt().solve(-jtr);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      const Eigen::VectorXd x_new = x + delta;
      const Eigen::VectorXd r_new = residual(x_new);
      const double cost_new = 0.5 * r_new.squaredNorm();
      if (std::isfinite(cost_new) && cost_new < cost) {
        const double cost_drop = cost - cost_new;
        const double step_norm = delta.norm();
        x = x_new;
        r = r_new;
        cost = cost_new;
        lambda = std::max(lambda / 3.0, 1e-12);
        stepped = true;
        if (cost_drop <= opts.cost_tol * std::max(cost, 1e-300) ||
            step_norm <= opts.step_tol * (x.norm() + opts.step_tol)) {
          res.converged = true;
        }
        break;
      }
      lambda *= 10.0;
    }
    if (!stepped) {
      // No damping value produced a descent step: stationary to working
      // precision.
      res.converged = true;
      break;
    }
    if (res.converged) break;
    jac = numeric_jacobian(residual, x, r);
  }

  jac = numeric_jacobian(residual, x, r);
  res.jtj = jac.transpose() * jac;
  res.x = std::move(x);
  res.cost = cost;
  return res;
}

NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                             Eigen::VectorXd x0, const NelderMeadOptions& opts) {
  const auto n = x0.size();
  std::vector<Eigen::VectorXd> pts(n + 1, x0);
  std::vector<double> vals(n + 1);
  for (Eigen::Index j = 0; j < n; ++j)
    pts[j + 1][j] += opts.initial_step * std::max(1.0, std::fabs(x0[j]));
  for (Eigen::Index k = 0; k <= n; ++k) vals[k] = f(pts[k]);

  NelderMeadResult res;
  auto order = [&] {
    for (std::size_t a = 1; a < pts.size(); ++a) {
      auto pv = pts[a];
      auto fv = vals[a];
      std::size_t b = a;
      while (b > 0 && vals[b - 1] > fv) {
        pts[b] = pts[b - 1];
        vals[b] = vals[b - 1];
        --b;
      }
      pts[b] = pv;
      vals[b] = fv;
    }
  };
  order();

  for (int iter = 0; iter < opts.max_iterations; ++iter) {
    res.iterations = iter + 1;
    const double f_spread = std::fabs(vals.back() - vals.front());
    double x_spread = 0.0;
    for (std::size_t k = 1; k < pts.size(); ++k)
      x_spread = std::max(x_spread, (pts[k] - pts[0]).norm());
    if (f_spread <= opts.f_tol * (std::fabs(vals[0]) + opts.f_tol) &&
        x_spread <= opts.x_tol * (pts[0].norm() + opts.x_tol)) {
      res.converged = true;
      break;
    }

    Eigen::VectorXd centroid = Eigen::VectorXd::Zero(n);
    for (Eigen::Index k = 0; k < n; ++k) centroid += pts[k];
    centroid /= static_cast<double>(n);

    const Eigen::VectorXd reflected = centroid + (centroid - pts[n]);
    const double f_ref = f(reflected);
    if (f_ref < vals[0]) {
      const Eigen::VectorXd expanded = centroid + 2.0 * (centroid - pts[n]);
      const double f_exp = f(expanded);
      if (f_exp < f_ref) {
        pts[n] = expanded;
        vals[n] = f_exp;
      } else {
        pts[n] = reflected;
        vals[n] = f_ref;
      }
    } else if (f_ref < vals[n - 1]) {
      pts[n] = reflected;
      vals[n] = f_ref;
    } else {
      const Eigen::VectorXd contracted = centroid + 0.5 * (pts[n] - centroid);
      const double f_con = f(contracted);
      if (f_con < vals[n]) {
        pts[n] = contracted;
        vals[n] = f_con;
      } else {
        for (Eigen::Index k = 1; k <= n; ++k) {
          pts[k] = pts[0] + 0.5 * (pts[k] - pts[0]);
          vals[k] = f(pts[k]);
        }
      }
    }
    order();
  }

  res.x = pts[0];
  res.value = vals[0];
  return res;
}

double golden_section_maximize(const std::function<double(double)>& f, double lo,
                               double hi, double x_tol, double* best_value) {
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - gr * (hi - lo);
  double x2 = lo + gr * (hi - lo);
  double f1 = f(x1);
  double f2 = f(x2);
  while (hi - lo > x_tol) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + gr * (hi - lo);
      f2 = f(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - gr * (hi - lo);
      f1 = f(x1);
    }
  }
  const double x = 0.5 * (lo + hi);
  if (best_value) *best_value = f(x);
  return x;
}

} // namespace bolo
