// Acceptance gate: one PASS/FAIL line per criterion, nonzero exit if any
// fail. Tolerances are pinned here, not configurable — these are the release
// criteria for the toolkit as a whole.

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <string>
#include <vector>

#include "bolosim/densities.hpp"
#include "bolosim/fidelity.hpp"
#include "bolosim/fitting.hpp"
#include "bolosim/model.hpp"
#include "bolosim/quadrature.hpp"
#include "bolosim/signal_proc.hpp"
#include "bolosim/trace_sim.hpp"
#include "support/stats.hpp"

using namespace bolo;
namespace ts = testsupport;

namespace {

int g_failures = 0;

void report(int n, const char* name, bool pass, const std::string& details) {
  std::printf("ACCEPTANCE %d [%s] %s  %s\n", n, name, pass ? "PASS" : "FAIL",
              details.c_str());
  if (!pass) ++g_failures;
}

std::string fmt(const char* f, ...) {
  char buf[512];
  va_list args;
  va_start(args, f);
  std::vsnprintf(buf, sizeof buf, f, args);
  va_end(args);
  return buf;
}

const BolometerResponse kResp{24.7, 182.0, 9.4};
const QubitDecayModel kQubit{25.8, 0.20};
const NoiseModel kNoise{3209.256}; // sigma = 17.4 mV over a 10.6 us window

Eigen::ArrayXd signals_of(const std::vector<ShotRecord>& shots) {
  Eigen::ArrayXd out(static_cast<Eigen::Index>(shots.size()));
  for (std::size_t i = 0; i < shots.size(); ++i)
    out[static_cast<Eigen::Index>(i)] = shots[i].s_mV;
  return out;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// --- criterion 1: flagship operating-point fidelity --------------------------

void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  SimulationSetup setup;
  setup.resp = kResp;
  setup.qubit = kQubit;
  setup.noise = kNoise;
  setup.win = AveragingWindow{13.9, 3.3, 0.0};
  setup.duration_us = 13.9;
  setup.dt_us = 0.05;

  const std::size_t n = 10000;
  const auto g = simulate_shot_batch(n, PreparedState::ground, setup,
                                     BaselineMode::common, 101, 0);
  const auto e = simulate_shot_batch(n, PreparedState::excited, setup,
                                     BaselineMode::common, 101, 0, n);
  const ThresholdResult r = optimal_threshold(signals_of(g), signals_of(e));
  const double elapsed = seconds_since(t0);

  const bool in_band = std::abs(r.fidelity - 0.618) <= 0.03;
  const bool in_time = elapsed < 30.0;
  report(1, "headline-fidelity", in_band && in_time,
         fmt("F_opt=%.4f target 0.618+/-0.03 | V_th=%.2f mV | %.1f s (limit 30 s)",
             r.fidelity, r.v_th_mV, elapsed));
}

// --- criterion 2: relaxation-limited error ------------------------------------

void criterion_2() {
  const double v = t1_error(13.9, 28.0);
  const bool ok = std::abs(v - 0.2197) <= 2.5e-4 && std::abs(v - 0.22) < 0.005;
  report(2, "t1-limited-error", ok,
         fmt("t1_error(13.9, 28)=%.6f target 0.2197 (rounds to 0.22)", v));
}

// --- criterion 3: SNR improvement budget --------------------------------------

void criterion_3() {
  BudgetFactors b;
  b.a_t = 2.0;
  b.a_c = 1.25;
  b.a_chi = 1.5;
  b.a_a = 2.0;
  b.a_2f = 2.0;
  b.baseline_overlap_infidelity = 0.07;
  b.target_infidelity = 0.001;
  b.pulse_shortening_ratio = 70.0;
  b.detector_resolution_gain = 13.0;
  const BudgetReport r = improvement_budget(b);

  const bool ok = r.available == 15.0 && std::abs(r.required - 9.69) <= 0.15 &&
                  std::abs(r.margin - 1.55) <= 0.02 && r.pass;
  report(3, "snr-budget", ok,
         fmt("required=%.4f (target 9.69+/-0.15) available=%.2f (target 15) "
             "margin=%.4f (target 1.55+/-0.02) pass=%s",
             r.required, r.available, r.margin, r.pass ? "yes" : "no"));
}

// --- criterion 4: per-shot baseline noise inflation ----------------------------

void criterion_4() {
  SimulationSetup setup;
  setup.resp = kResp;
  setup.qubit = kQubit;
  setup.noise = kNoise;
  setup.win = AveragingWindow{13.9, 3.3, 1.1};
  setup.pre_pulse_us = 2.0;
  setup.duration_us = 2.0 + 13.9;
  setup.dt_us = 0.05;

  const auto g = simulate_shot_batch(10000, PreparedState::ground, setup,
                                     BaselineMode::per_shot, 404, 0);
  const double sd = ts::sample_std(signals_of(g));
  const bool ok = std::abs(sd - 56.7) <= 1.0;
  report(4, "per-shot-baseline-noise", ok,
         fmt("std(S)=%.2f mV target 56.7+/-1.0 (common-baseline sigma 17.4)", sd));
}

// --- criterion 5: short-pulse per-shot-baseline operating point ----------------

void criterion_5() {
  SimulationSetup setup;
  setup.resp = kResp;
  setup.qubit = kQubit;
  setup.noise = kNoise;
  setup.win = AveragingWindow{20.0, 15.0, 1.1}; // 5 us averaging at the pulse end
  setup.pre_pulse_us = 2.0;
  setup.duration_us = 2.0 + 20.0;
  setup.dt_us = 0.05;

  const std::size_t n = 10000;
  const auto g = simulate_shot_batch(n, PreparedState::ground, setup,
                                     BaselineMode::per_shot, 505, 0);
  const auto e = simulate_shot_batch(n, PreparedState::excited, setup,
                                     BaselineMode::per_shot, 505, 0, n);
  const ThresholdResult r = optimal_threshold(signals_of(g), signals_of(e));
  const bool ok = std::abs(r.fidelity - 0.49) <= 0.06;
  report(5, "short-pulse-per-shot-fidelity", ok,
         fmt("F_opt=%.4f target 0.49+/-0.06 (t_RO=20, avg=5, t_base=1.1)", r.fidelity));
}

// --- criterion 6: post-processing fidelity landscape ---------------------------

// True when every cell above the level forms one 4-connected component.
bool connected_above(const Eigen::MatrixXd& f, double level) {
  const Eigen::Index rows = f.rows(), cols = f.cols();
  Eigen::MatrixXi mark = Eigen::MatrixXi::Zero(rows, cols);
  Eigen::Index total = 0, seed_i = -1, seed_j = -1;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j)
      if (std::isfinite(f(i, j)) && f(i, j) > level) {
        ++total;
        seed_i = i;
        seed_j = j;
      }
  if (total == 0) return false;

  std::vector<std::pair<Eigen::Index, Eigen::Index>> stack{{seed_i, seed_j}};
  mark(seed_i, seed_j) = 1;
  Eigen::Index seen = 0;
  while (!stack.empty()) {
    const auto [i, j] = stack.back();
    stack.pop_back();
    ++seen;
    const Eigen::Index di[] = {1, -1, 0, 0}, dj[] = {0, 0, 1, -1};
    for (int k = 0; k < 4; ++k) {
      const Eigen::Index ni = i + di[k], nj = j + dj[k];
      if (ni < 0 || nj < 0 || ni >= rows || nj >= cols) continue;
      if (mark(ni, nj) || !std::isfinite(f(ni, nj)) || f(ni, nj) <= level) continue;
      mark(ni, nj) = 1;
      stack.emplace_back(ni, nj);
    }
  }
  return seen == total;
}

Eigen::Index nearest_index(const Eigen::ArrayXd& axis, double value) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < axis.size(); ++i)
    if (std::abs(axis[i] - value) < std::abs(axis[best] - value)) best = i;
  return best;
}

void criterion_6() {
  const auto t0 = std::chrono::steady_clock::now();
  SimulationSetup setup;
  setup.resp = kResp;
  setup.qubit = kQubit;
  setup.noise = kNoise;
  setup.win = AveragingWindow{40.0, 10.0, 0.0}; // window only bounds the trace span
  setup.duration_us = 40.0;
  setup.dt_us = 0.05;

  const std::size_t n = 1000;
  const auto tg = simulate_trace_batch(n, PreparedState::ground, setup, 606, 0);
  const auto te = simulate_trace_batch(n, PreparedState::excited, setup, 606, 0, n);

  const Eigen::ArrayXd t_ro = Eigen::ArrayXd::LinSpaced(30, 2.0, 40.0);
  const Eigen::ArrayXd avg = Eigen::ArrayXd::LinSpaced(30, 1.0, 30.0);
  const LandscapeGrid grid = fidelity_landscape(tg, te, t_ro, avg, 0.0, 0, 0.6);
  const double elapsed = seconds_since(t0);

  const bool connected = connected_above(grid.fidelity, 0.6);
  const Eigen::Index ref_i = nearest_index(t_ro, 13.9);
  const Eigen::Index ref_j = nearest_index(avg, 10.6);
  const bool location_ok =
      std::abs(grid.max_i - ref_i) <= 1 && std::abs(grid.max_j - ref_j) <= 1;
  const bool value_ok = std::abs(grid.f_max - 0.618) <= 0.04;
  const bool in_time = elapsed < 300.0;

  report(6, "fidelity-landscape", connected && location_ok && value_ok && in_time,
         fmt("connected(F>0.6)=%s | max F=%.4f at (%.2f, %.2f) us target "
             "0.618+/-0.04 within one cell of (13.9, 10.6) -> location %s | "
             "%.1f s (limit 300 s)",
             connected ? "yes" : "no", grid.f_max, t_ro[grid.max_i], avg[grid.max_j],
             location_ok ? "ok" : "off", elapsed));
}

// --- criterion 7: thermal-time-constant recovery --------------------------------

void criterion_7() {
  // Long-pulse characterization: 1 ms pulses sampled at 250 MS/s with the
  // dataset's noise density. A single such trace carries ~10% statistical
  // uncertainty on tau, so — as in any time-constant calibration — the fit
  // runs on an average of repeated traces, then 512-sample boxcar decimation.
  BolometerResponse resp{182.0, 182.0, 36.2};
  const double pre = 5.0;
  const int n_avg = 300;
  Eigen::ArrayXd acc;
  for (int k = 0; k < n_avg; ++k) {
    const Trace t =
        simulate_trace(PreparedState::ground, resp, kQubit, kNoise, pre + 1000.0,
                       0.004, {707, static_cast<std::uint64_t>(k)}, pre);
    if (k == 0)
      acc = t.samples;
    else
      acc += t.samples;
  }
  const Trace mean{0.004, pre, acc / static_cast<double>(n_avg)};
  const Trace dec = boxcar_downsample(mean, 512);
  const ExpRiseFitResult fit = fit_exponential_rise(dec);

  const bool ok = fit.converged && !fit.tau_unidentifiable &&
                  std::abs(fit.tau_us - 36.2) <= 0.05 * 36.2;
  report(7, "thermal-time-constant-fit", ok,
         fmt("tau=%.3f us target 36.2+/-5%% | amplitude=%.1f mV | converged=%s",
             fit.tau_us, fit.amplitude_mV, fit.converged ? "yes" : "no"));
}

// --- criterion 8: oracle equivalence (property-based) ---------------------------

void criterion_8() {
  DecayDistParams p;
  p.c_g_mV = kResp.c_g_mV;
  p.c_e_mV = kResp.c_e_mV;
  p.t1_us = kQubit.t1_us;
  p.sigma_mV = 17.4;
  p.p_x = kQubit.p_x;
  p.win = AveragingWindow{13.9, 3.3, 0.0};
  p.tau_b_us = kResp.tau_b_us;

  // (a) decay-marginal density vs a full-pipeline Monte Carlo histogram.
  SimulationSetup setup;
  setup.resp = kResp;
  setup.qubit = QubitDecayModel{kQubit.t1_us, 0.0}; // marginal excludes prep error
  setup.noise = kNoise;
  setup.win = p.win;
  setup.duration_us = 13.9;
  setup.dt_us = 0.05;
  const auto shots = simulate_shot_batch(100000, PreparedState::excited, setup,
                                         BaselineMode::common, 808, 0);
  const double pval = ts::chi2_pvalue_against_cdf(
      signals_of(shots), [&](double v) { return cdf_excited_marginal(v, p, 1e-10); });
  const bool chi_ok = pval > 0.01;

  // (b) normalization of all three densities to 1 +/- 1e-7.
  const double lo = p.c_g_mV - 10.0 * p.sigma_mV;
  const double hi = p.c_e_mV + 10.0 * p.sigma_mV;
  const double ng =
      integrate_adaptive([&](double v) { return pdf_ground(v, p); }, lo, hi, 1e-10, 1e-10)
          .value;
  const double nm = integrate_adaptive(
                        [&](double v) { return pdf_excited_marginal(v, p, 1e-10); }, lo,
                        hi, 1e-9, 1e-9)
                        .value;
  const double nt = integrate_adaptive(
                        [&](double v) { return pdf_excited_total(v, p, 1e-10); }, lo, hi,
                        1e-9, 1e-9)
                        .value;
  const bool norm_ok = std::abs(ng - 1.0) <= 1e-7 && std::abs(nm - 1.0) <= 1e-7 &&
                       std::abs(nt - 1.0) <= 1e-7;

  // (c) threshold scan equals brute force exactly on a fresh 2000+2000 set.
  SimulationSetup full = setup;
  full.qubit = kQubit;
  const auto bg = simulate_shot_batch(2000, PreparedState::ground, full,
                                      BaselineMode::common, 818, 0);
  const auto be = simulate_shot_batch(2000, PreparedState::excited, full,
                                      BaselineMode::common, 818, 0, 2000);
  const ThresholdResult scan = optimal_threshold(signals_of(bg), signals_of(be));
  const ts::BruteThreshold brute =
      ts::brute_optimal_threshold(signals_of(bg), signals_of(be));
  const bool scan_ok =
      std::abs(scan.fidelity - brute.fidelity) <= 1e-12 && scan.reversed == brute.reversed;

  // (d) five-parameter round trip within 10% from direct generative samples.
  Eigen::ArrayXd direct(50000);
  for (Eigen::Index i = 0; i < direct.size(); ++i) {
    ShotRng rng({828, static_cast<std::uint64_t>(i)});
    double mean;
    if (rng.bernoulli(p.p_x)) {
      mean = window_mean_ground(p.win, p.response());
    } else {
      const double t_d = rng.exponential(p.t1_us);
      mean = window_mean_excited(p.win, p.response(), std::min(t_d, p.win.t_ro_us));
    }
    direct[i] = mean + p.sigma_mV * rng.normal();
  }
  const DecayFitResult fit = fit_decay_model(direct, p.win, p.tau_b_us,
                                             FitMethod::weighted_least_squares);
  auto within = [](double a, double b) { return std::abs(a - b) <= 0.10 * std::abs(b); };
  const bool fit_ok = fit.converged && within(fit.params.c_g_mV, p.c_g_mV) &&
                      within(fit.params.c_e_mV, p.c_e_mV) &&
                      within(fit.params.t1_us, p.t1_us) &&
                      within(fit.params.sigma_mV, p.sigma_mV) &&
                      within(fit.params.p_x, p.p_x);

  report(8, "oracle-equivalence", chi_ok && norm_ok && scan_ok && fit_ok,
         fmt("chi2 p=%.3f (>0.01) | norms %.9f/%.9f/%.9f | threshold==brute %s | "
             "round-trip c_g=%.1f c_e=%.1f T1=%.1f sigma=%.1f P_x=%.3f (10%%)",
             pval, ng, nm, nt, scan_ok ? "yes" : "no", fit.params.c_g_mV,
             fit.params.c_e_mV, fit.params.t1_us, fit.params.sigma_mV, fit.params.p_x));
}

// --- criterion 9: documented exclusions are surfaced, not synthesized -----------

void criterion_9() {
  // The decay-free fidelity has no single derivation that this toolkit can
  // reproduce; it must be reported as two explicit candidates plus a
  // discrepancy flag against the externally supplied reference.
  DecayDistParams p;
  p.c_g_mV = kResp.c_g_mV;
  p.c_e_mV = kResp.c_e_mV;
  p.t1_us = kQubit.t1_us;
  p.sigma_mV = 17.4;
  p.p_x = kQubit.p_x;
  p.win = AveragingWindow{13.9, 3.3, 0.0};
  p.tau_b_us = kResp.tau_b_us;

  const DecayFreeFidelityReport r = decay_free_fidelity(p, 0.927);
  const bool candidates_ok = r.via_model_t1_removed > 0.0 &&
                             r.via_model_t1_removed <= 1.0 &&
                             r.via_gaussian_overlap > 0.0 && r.via_gaussian_overlap <= 1.0;
  const bool flag_ok = r.reference.has_value() && r.discrepancy;
  report(9, "decay-free-exclusion", candidates_ok && flag_ok,
         fmt("candidates %.4f / %.4f vs reference 0.927 -> discrepancy flagged=%s",
             r.via_model_t1_removed, r.via_gaussian_overlap,
             r.discrepancy ? "yes" : "no"));
}

} // namespace

int main() {
  criterion_1();
  criterion_2();
  criterion_3();
  criterion_4();
  criterion_5();
  criterion_6();
  criterion_7();
  criterion_8();
  criterion_9();
  std::printf("ACCEPTANCE SUMMARY %d/9 criteria pass\n", 9 - g_failures);
  return g_failures == 0 ? 0 : 1;
}
