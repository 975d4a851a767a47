#include "bolosim/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <thread>

#include "bolosim/model.hpp"
#include "bolosim/optim.hpp"
#include "bolosim/special.hpp"

namespace bolo {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

ThresholdResult empirical_fidelity(const Eigen::ArrayXd& shots_g,
                                   const Eigen::ArrayXd& shots_e, double v_th_mV) {
  if (shots_g.size() == 0 || shots_e.size() == 0)
    throw std::invalid_argument("empirical_fidelity: empty sample set");
  const double n_g = static_cast<double>(shots_g.size());
  const double n_e = static_cast<double>(shots_e.size());
  ThresholdResult r;
  r.v_th_mV = v_th_mV;
  r.p_e_given_g = (shots_g > v_th_mV).count() / n_g;
  r.p_g_given_e = (shots_e <= v_th_mV).count() / n_e;
  r.fidelity = 1.0 - r.p_g_given_e - r.p_e_given_g;
  return r;
}

ThresholdResult optimal_threshold(const Eigen::ArrayXd& shots_g,
                                  const Eigen::ArrayXd& shots_e) {
  if (shots_g.size() == 0 || shots_e.size() == 0)
    throw std::invalid_argument("optimal_threshold: empty sample set");

  std::vector<double> g(shots_g.data(), shots_g.data() + shots_g.size());
  std::vector<double> e(shots_e.data(), shots_e.data() + shots_e.size());
  std::sort(g.begin(), g.end());
  std::sort(e.begin(), e.end());

  std::vector<double> merged;
  merged.reserve(g.size() + e.size());
  std::merge(g.begin(), g.end(), e.begin(), e.end(), std::back_inserter(merged));

  const double n_g = static_cast<double>(g.size());
  const double n_e = static_cast<double>(e.size());

  // Walk candidate thresholds (midpoints of consecutive merged values) in
  // increasing order, maintaining the counts of samples at or below the
  // candidate. F(c) = cg/n_g - ce/n_e in the standard orientation and its
  // negative in the reversed one; both maxima are tracked with ties broken
  // toward the smallest threshold.
  std::size_t ig = 0, ie = 0;
  double best_f = -std::numeric_limits<double>::infinity();
  double best_v = 0.5 * (merged.front() + merged.back());
  double best_rev_f = -std::numeric_limits<double>::infinity();
  double best_rev_v = best_v;
  double best_cg = 0, best_ce = 0, best_rev_cg = 0, best_rev_ce = 0;

  for (std::size_t k = 0; k + 1 < merged.size(); ++k) {
    if (merged[k] == merged[k + 1]) continue; // same midpoint as neighbors
    const double c = merged[k] + 0.5 * (merged[k + 1] - merged[k]);
    while (ig < g.size() && g[ig] <= c) ++ig;
    while (ie < e.size() && e[ie] <= c) ++ie;
    const double f = static_cast<double>(ig) / n_g - static_cast<double>(ie) / n_e;
    if (f > best_f) {
      best_f = f;
      best_v = c;
      best_cg = static_cast<double>(ig);
      best_ce = static_cast<double>(ie);
    }
    if (-f > best_rev_f) {
      best_rev_f = -f;
      best_rev_v = c;
      best_rev_cg = static_cast<double>(ig);
      best_rev_ce = static_cast<double>(ie);
    }
  }

  ThresholdResult r;
  if (best_f == -std::numeric_limits<double>::infinity()) {
    // No candidate at all: every sample of both sets is the same value.
    r.v_th_mV = merged.front();
    r.p_g_given_e = 1.0;
    r.p_e_given_g = 0.0;
    r.fidelity = 0.0;
    return r;
  }
  if (best_rev_f > best_f) {
    r.reversed = true;
    r.v_th_mV = best_rev_v;
    r.p_e_given_g = best_rev_cg / n_g;        // ground shots called excited (S <= V_th)
    r.p_g_given_e = 1.0 - best_rev_ce / n_e;  // excited shots called ground (S > V_th)
  } else {
    r.v_th_mV = best_v;
    r.p_e_given_g = 1.0 - best_cg / n_g;
    r.p_g_given_e = best_ce / n_e;
  }
  r.fidelity = 1.0 - r.p_g_given_e - r.p_e_given_g;
  return r;
}

ThresholdResult model_fidelity(const DecayDistParams& p, double v_th_mV,
                               double quad_abs_tol) {
  p.validate();
  ThresholdResult r;
  r.v_th_mV = v_th_mV;
  r.p_g_given_e = cdf_excited_total(v_th_mV, p, quad_abs_tol);
  r.p_e_given_g = 1.0 - cdf_ground(v_th_mV, p);
  r.fidelity = 1.0 - r.p_g_given_e - r.p_e_given_g;
  return r;
}

ThresholdResult model_optimal_threshold(const DecayDistParams& p,
                                        double quad_abs_tol) {
  p.validate();
  const BolometerResponse resp = p.response();
  const double m_g = window_mean_ground(p.win, resp);
  const double m_e = window_mean_excited(p.win, resp, p.win.t_ro_us);
  const double lo = std::min(m_g, m_e) - 6.0 * p.sigma_mV;
  const double hi = std::max(m_g, m_e) + 6.0 * p.sigma_mV;

  auto f_at = [&](double v) { return model_fidelity(p, v, quad_abs_tol).fidelity; };

  // Coarse bracket first: with the decay mixture the objective can have
  // several stationary points, and golden-section alone assumes unimodality.
  // The magnitude comparison covers both orientations in one pass.
  constexpr int kScan = 160;
  double best_v = lo;
  double best_f = 0.0;
  for (int k = 0; k <= kScan; ++k) {
    const double v = lo + (hi - lo) * k / kScan;
    const double f = f_at(v);
    if (std::fabs(f) > std::fabs(best_f)) {
      best_f = f;
      best_v = v;
    }
  }
  const bool reversed = best_f < 0.0;
  const double step = (hi - lo) / kScan;
  auto objective = [&](double v) { return reversed ? -f_at(v) : f_at(v); };
  const double v_opt = golden_section_maximize(objective, best_v - step,
                                               best_v + step, 1e-6 * p.sigma_mV);

  ThresholdResult r = model_fidelity(p, v_opt, quad_abs_tol);
  if (reversed) {
    // Report the achievable fidelity of the flipped decision rule.
    r.reversed = true;
    const double pg_e = 1.0 - r.p_g_given_e;
    const double pe_g = 1.0 - r.p_e_given_g;
    r.p_g_given_e = pg_e;
    r.p_e_given_g = pe_g;
    r.fidelity = 1.0 - pg_e - pe_g;
  }
  return r;
}

double gaussian_snr_fidelity(double delta_u_mV, double sigma_mV) {
  if (!(sigma_mV > 0.0))
    throw std::invalid_argument("gaussian_snr_fidelity: sigma must be > 0");
  return std::erf(delta_u_mV / (2.0 * kSqrt2 * sigma_mV));
}

double t1_error(double t_ro_us, double t1_us) {
  if (!(t_ro_us >= 0.0) || !(t1_us > 0.0))
    throw std::invalid_argument("t1_error: require t_RO >= 0 and T1 > 0");
  return 1.0 - std::exp(-t_ro_us / (2.0 * t1_us));
}

namespace {

void check_uniform_geometry(const std::vector<Trace>& traces) {
  for (const auto& t : traces) {
    t.validate();
    if (t.dt_us != traces.front().dt_us ||
        t.t_pulse_start_us != traces.front().t_pulse_start_us ||
        t.samples.size() != traces.front().samples.size())
      throw std::invalid_argument(
          "fidelity_landscape: traces must share dt, pulse start and length");
  }
}

template <typename Body>
void parallel_cells(Eigen::Index count, int threads, const Body& body) {
  unsigned workers = threads > 0 ? static_cast<unsigned>(threads)
                                 : std::max(1u, std::thread::hardware_concurrency());
  workers = static_cast<unsigned>(std::min<Eigen::Index>(workers, std::max<Eigen::Index>(count, 1)));
  if (workers <= 1) {
    for (Eigen::Index k = 0; k < count; ++k) body(k);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      for (Eigen::Index k = w; k < count; k += workers) body(k);
    });
  for (auto& t : pool) t.join();
}

} // namespace

LandscapeGrid fidelity_landscape(const std::vector<Trace>& traces_g,
                                 const std::vector<Trace>& traces_e,
                                 const Eigen::ArrayXd& t_ro_axis_us,
                                 const Eigen::ArrayXd& averaging_axis_us,
                                 double common_baseline_mV, int threads,
                                 double boundary_level) {
  if (traces_g.empty() || traces_e.empty())
    throw std::invalid_argument("fidelity_landscape: empty trace set");
  if (t_ro_axis_us.size() == 0 || averaging_axis_us.size() == 0)
    throw std::invalid_argument("fidelity_landscape: empty grid axis");
  check_uniform_geometry(traces_g);
  check_uniform_geometry(traces_e);

  LandscapeGrid grid;
  grid.t_ro_axis_us = t_ro_axis_us;
  grid.averaging_axis_us = averaging_axis_us;
  grid.boundary_level = boundary_level;
  const auto ni = t_ro_axis_us.size();
  const auto nj = averaging_axis_us.size();
  grid.fidelity = Eigen::MatrixXd::Constant(ni, nj, kNaN);
  grid.v_th_mV = Eigen::MatrixXd::Constant(ni, nj, kNaN);

  parallel_cells(ni * nj, threads, [&](Eigen::Index cell) {
    const Eigen::Index i = cell / nj;
    const Eigen::Index j = cell % nj;
    const double t_ro = t_ro_axis_us[i];
    const double avg = averaging_axis_us[j];
    AveragingWindow win{t_ro, t_ro - avg, 0.0};
    try {
      win.validate();
    } catch (const std::invalid_argument&) {
      return; // averaging time exceeds t_RO: cell infeasible
    }
    Eigen::ArrayXd s_g(traces_g.size()), s_e(traces_e.size());
    try {
      for (std::size_t k = 0; k < traces_g.size(); ++k)
        s_g[static_cast<Eigen::Index>(k)] =
            extract_signal(traces_g[k], win, BaselineMode::common, common_baseline_mV);
      for (std::size_t k = 0; k < traces_e.size(); ++k)
        s_e[static_cast<Eigen::Index>(k)] =
            extract_signal(traces_e[k], win, BaselineMode::common, common_baseline_mV);
    } catch (const std::invalid_argument&) {
      return; // window does not fit the traces: cell infeasible
    }
    const ThresholdResult r = optimal_threshold(s_g, s_e);
    grid.fidelity(i, j) = r.fidelity;
    grid.v_th_mV(i, j) = r.v_th_mV;
  });

  grid.f_max = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ni; ++i)
    for (Eigen::Index j = 0; j < nj; ++j)
      if (std::isfinite(grid.fidelity(i, j)) && grid.fidelity(i, j) > grid.f_max) {
        grid.f_max = grid.fidelity(i, j);
        grid.max_i = i;
        grid.max_j = j;
      }
  if (grid.max_i < 0)
    throw std::invalid_argument("fidelity_landscape: no feasible grid cell");

  grid.boundary = extract_contour(t_ro_axis_us, averaging_axis_us, grid.fidelity,
                                  boundary_level);
  return grid;
}

namespace {

struct ContourPoint {
  double x, y;
};

using SegmentList = std::vector<std::pair<ContourPoint, ContourPoint>>;

// Quantized endpoint key so float-identical crossings stitch together.
std::pair<std::int64_t, std::int64_t> key_of(const ContourPoint& p, double sx, double sy) {
  return {static_cast<std::int64_t>(std::llround(p.x / sx * 1e9)),
          static_cast<std::int64_t>(std::llround(p.y / sy * 1e9))};
}

} // namespace

std::vector<Eigen::ArrayX2d> extract_contour(const Eigen::ArrayXd& x_axis,
                                             const Eigen::ArrayXd& y_axis,
                                             const Eigen::MatrixXd& values,
                                             double level) {
  if (values.rows() != x_axis.size() || values.cols() != y_axis.size())
    throw std::invalid_argument("extract_contour: matrix shape does not match axes");

  auto inside = [&](double v) { return v > level; }; // NaN compares false
  auto lerp = [&](double a, double fa, double b, double fb) {
    return a + (level - fa) / (fb - fa) * (b - a);
  };

  SegmentList segments;
  for (Eigen::Index i = 0; i + 1 < x_axis.size(); ++i) {
    for (Eigen::Index j = 0; j + 1 < y_axis.size(); ++j) {
      const double f00 = values(i, j), f10 = values(i + 1, j);
      const double f11 = values(i + 1, j + 1), f01 = values(i, j + 1);
      if (std::isnan(f00) || std::isnan(f10) || std::isnan(f11) || std::isnan(f01))
        continue; // boundary undefined against absent cells
      const int mask = (inside(f00) ? 1 : 0) | (inside(f10) ? 2 : 0) |
                       (inside(f11) ? 4 : 0) | (inside(f01) ? 8 : 0);
      if (mask == 0 || mask == 15) continue;

      const double x0 = x_axis[i], x1 = x_axis[i + 1];
      const double y0 = y_axis[j], y1 = y_axis[j + 1];
      const ContourPoint bottom{lerp(x0, f00, x1, f10), y0};
      const ContourPoint right{x1, lerp(y0, f10, y1, f11)};
      const ContourPoint top{lerp(x0, f01, x1, f11), y1};
      const ContourPoint left{x0, lerp(y0, f00, y1, f01)};

      auto emit = [&](ContourPoint a, ContourPoint b) { segments.emplace_back(a, b); };
      switch (mask) {
        case 1: emit(left, bottom); break;
        case 2: emit(bottom, right); break;
        case 3: emit(left, right); break;
        case 4: emit(right, top); break;
        case 5: {
          const double center = 0.25 * (f00 + f10 + f11 + f01);
          if (inside(center)) {
            emit(left, top);
            emit(bottom, right);
          } else {
            emit(left, bottom);
            emit(right, top);
          }
          break;
        }
        case 6: emit(bottom, top); break;
        case 7: emit(left, top); break;
        case 8: emit(top, left); break;
        case 9: emit(bottom, top); break;
        case 10: {
          const double center = 0.25 * (f00 + f10 + f11 + f01);
          if (inside(center)) {
            emit(left, bottom);
            emit(right, top);
          } else {
            emit(left, top);
            emit(bottom, right);
          }
          break;
        }
        case 11: emit(right, top); break;
        case 12: emit(left, right); break;
        case 13: emit(bottom, right); break;
        case 14: emit(left, bottom); break;
        default: break;
      }
    }
  }

  // Stitch segments into polylines: walk from degree-1 endpoints first (open
  // chains), then whatever remains (closed loops).
  const double sx = std::max(1e-12, std::fabs(x_axis[x_axis.size() - 1] - x_axis[0]));
  const double sy = std::max(1e-12, std::fabs(y_axis[y_axis.size() - 1] - y_axis[0]));
  std::multimap<std::pair<std::int64_t, std::int64_t>, std::size_t> by_end;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    by_end.emplace(key_of(segments[s].first, sx, sy), s);
    by_end.emplace(key_of(segments[s].second, sx, sy), s);
  }
  std::vector<bool> used(segments.size(), false);
  std::vector<Eigen::ArrayX2d> polylines;

  auto walk = [&](std::size_t start, bool from_first) {
    std::vector<ContourPoint> chain;
    std::size_t cur = start;
    ContourPoint tail = from_first ? segments[cur].first : segments[cur].second;
    chain.push_back(tail);
    ContourPoint head = from_first ? segments[cur].second : segments[cur].first;
    used[cur] = true;
    chain.push_back(head);
    bool extended = true;
    while (extended) {
      extended = false;
      const auto k = key_of(head, sx, sy);
      auto range = by_end.equal_range(k);
      for (auto it = range.first; it != range.second; ++it) {
        const std::size_t s = it->second;
        if (used[s]) continue;
        used[s] = true;
        const auto kf = key_of(segments[s].first, sx, sy);
        head = (kf == k) ? segments[s].second : segments[s].first;
        chain.push_back(head);
        extended = true;
        break;
      }
    }
    Eigen::ArrayX2d line(static_cast<Eigen::Index>(chain.size()), 2);
    for (std::size_t p = 0; p < chain.size(); ++p) {
      line(static_cast<Eigen::Index>(p), 0) = chain[p].x;
      line(static_cast<Eigen::Index>(p), 1) = chain[p].y;
    }
    polylines.push_back(std::move(line));
  };

  // Endpoint degree census to find open-chain starts.
  std::map<std::pair<std::int64_t, std::int64_t>, int> degree;
  for (std::size_t s = 0; s < segments.size(); ++s) {
    ++degree[key_of(segments[s].first, sx, sy)];
    ++degree[key_of(segments[s].second, sx, sy)];
  }
  for (std::size_t s = 0; s < segments.size(); ++s) {
    if (used[s]) continue;
    const bool first_open = degree[key_of(segments[s].first, sx, sy)] == 1;
    const bool second_open = degree[key_of(segments[s].second, sx, sy)] == 1;
    if (first_open)
      walk(s, true);
    else if (second_open)
      walk(s, false);
  }
  for (std::size_t s = 0; s < segments.size(); ++s)
    if (!used[s]) walk(s, true); // remaining closed loops

  return polylines;
}

double required_snr_factor(double baseline_overlap_infidelity,
                           double target_infidelity) {
  if (!(baseline_overlap_infidelity > 0.0 && baseline_overlap_infidelity < 1.0) ||
      !(target_infidelity > 0.0 && target_infidelity < 1.0))
    throw std::invalid_argument("required_snr_factor: infidelities must be in (0, 1)");
  return erf_inv(1.0 - target_infidelity) / erf_inv(1.0 - baseline_overlap_infidelity);
}

BudgetReport improvement_budget(const BudgetFactors& b) {
  if (!(b.a_t > 0 && b.a_c > 0 && b.a_chi > 0 && b.a_a > 0 && b.a_2f > 0) ||
      !(b.pulse_shortening_ratio > 0) || !(b.detector_resolution_gain > 0))
    throw std::invalid_argument("improvement_budget: factors must be positive");
  BudgetReport r;
  r.required = required_snr_factor(b.baseline_overlap_infidelity, b.target_infidelity) *
               b.pulse_shortening_ratio / b.detector_resolution_gain;
  r.available = b.a_t * b.a_c * b.a_chi * b.a_a * b.a_2f;
  r.margin = r.available / r.required;
  r.pass = r.available >= r.required;
  return r;
}

DecayFreeFidelityReport decay_free_fidelity(const DecayDistParams& fitted,
                                            std::optional<double> reference) {
  fitted.validate();
  DecayFreeFidelityReport rep;
  rep.reference = reference;

  // (i) Remove relaxation and preparation error from the full model and
  // re-optimize the threshold. T1 is made enormous rather than infinite so the
  // same quadrature path is exercised.
  DecayDistParams frozen = fitted;
  frozen.t1_us = 1e9;
  frozen.p_x = 0.0;
  rep.via_model_t1_removed = model_optimal_threshold(frozen).fidelity;

  // (ii) Closed-form overlap of the fitted window means.
  const BolometerResponse resp = fitted.response();
  const double delta = window_mean_excited(fitted.win, resp, fitted.win.t_ro_us) -
                       window_mean_ground(fitted.win, resp);
  rep.via_gaussian_overlap = gaussian_snr_fidelity(std::fabs(delta), fitted.sigma_mV);

  constexpr double kTol = 0.02;
  if (reference.has_value()) {
    rep.discrepancy = std::fabs(rep.via_model_t1_removed - *reference) > kTol ||
                      std::fabs(rep.via_gaussian_overlap - *reference) > kTol;
  } else {
    rep.discrepancy =
        std::fabs(rep.via_model_t1_removed - rep.via_gaussian_overlap) > kTol;
  }
  return rep;
}

} // namespace bolo
