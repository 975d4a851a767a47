#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>
#include <optional>

#include "bolosim/model.hpp"
#include "bolosim/quadrature.hpp"
#include "bolosim/special.hpp"
#include "support/stats.hpp"

using namespace bolo;
namespace ts = testsupport;

namespace {

const BolometerResponse kResp{24.7, 182.0, 9.4};
const AveragingWindow kWin{13.9, 3.3, 0.0};

// Independent path to the window means: adaptive quadrature of the pointwise
// response instead of the closed-form antiderivative.
double window_mean_oracle(const AveragingWindow& win, const BolometerResponse& resp,
                          std::optional<double> t_d) {
  auto f = [&](double t) {
    return t_d ? noiseless_response_excited(t, *t_d, resp)
               : noiseless_response_ground(t, resp);
  };
  const QuadratureResult q = integrate_adaptive(f, win.t0_us, win.t_ro_us, 1e-13, 1e-13);
  return q.value / win.length_us();
}

} // namespace

TEST_CASE("ground response: pointwise values and shape") {
  CHECK(noiseless_response_ground(0.0, kResp) == 0.0);
  // One thermal time constant reaches 1 - 1/e of the plateau.
  CHECK(noiseless_response_ground(9.4, kResp) ==
        doctest::Approx(24.7 * -std::expm1(-1.0)).epsilon(1e-14));
  CHECK(noiseless_response_ground(500.0, kResp) == doctest::Approx(24.7).epsilon(1e-12));
  // Monotone rise.
  double prev = -1.0;
  for (double t = 0.0; t < 40.0; t += 0.5) {
    const double u = noiseless_response_ground(t, kResp);
    CHECK(u > prev);
    prev = u;
  }
  // Array overload agrees with the scalar path (different instruction
  // sequences, so compare to roundoff rather than bitwise).
  Eigen::ArrayXd t_grid = Eigen::ArrayXd::LinSpaced(17, 0.0, 30.0);
  const Eigen::ArrayXd u = noiseless_response_ground(t_grid, kResp);
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    CHECK(u[i] == doctest::Approx(noiseless_response_ground(t_grid[i], kResp))
                      .epsilon(1e-13));
  CHECK_THROWS_AS(noiseless_response_ground(-0.1, kResp), std::invalid_argument);
}

TEST_CASE("excited response: rise, decay handoff, continuity") {
  // Before the decay the trace rises toward c_e.
  CHECK(noiseless_response_excited(3.0, 5.0, kResp) ==
        doctest::Approx(182.0 * -std::expm1(-3.0 / 9.4)).epsilon(1e-14));
  // At the decay instant the level is c_e * (1 - exp(-t_d/tau_b)).
  CHECK(noiseless_response_excited(5.0, 5.0, kResp) ==
        doctest::Approx(182.0 * -std::expm1(-5.0 / 9.4)).epsilon(1e-14));
  CHECK(noiseless_response_excited(5.0, 5.0, kResp) == doctest::Approx(75.07883).epsilon(1e-5));
  // Continuous across the decay instant.
  for (const double t_d : {0.3, 2.0, 5.0, 9.4, 13.0}) {
    const double before = noiseless_response_excited(t_d - 1e-9, t_d, kResp);
    const double after = noiseless_response_excited(t_d + 1e-9, t_d, kResp);
    CHECK(before == doctest::Approx(after).epsilon(1e-6));
  }
  // After the decay the trace relaxes to the ground plateau.
  CHECK(noiseless_response_excited(600.0, 5.0, kResp) ==
        doctest::Approx(24.7).epsilon(1e-12));
  // t_d = 0 means the qubit was never excited during the pulse.
  for (const double t : {0.5, 3.0, 10.0})
    CHECK(noiseless_response_excited(t, 0.0, kResp) ==
          doctest::Approx(noiseless_response_ground(t, kResp)).epsilon(1e-13));
  // Array overload agrees with the scalar path across the kink.
  Eigen::ArrayXd t_grid = Eigen::ArrayXd::LinSpaced(23, 0.0, 14.0);
  const Eigen::ArrayXd u = noiseless_response_excited(t_grid, 5.0, kResp);
  for (Eigen::Index i = 0; i < t_grid.size(); ++i)
    CHECK(u[i] == doctest::Approx(noiseless_response_excited(t_grid[i], 5.0, kResp))
                      .epsilon(1e-13));
}

TEST_CASE("ground window mean: closed form vs quadrature") {
  const double closed = window_mean_ground(kWin, kResp);
  CHECK(closed == doctest::Approx(window_mean_oracle(kWin, kResp, std::nullopt))
                      .epsilon(1e-11));
  CHECK(closed == doctest::Approx(14.2736).epsilon(2e-5));
  // Linear in the plateau amplitude.
  BolometerResponse doubled = kResp;
  doubled.c_g_mV *= 2.0;
  CHECK(window_mean_ground(kWin, doubled) == doctest::Approx(2.0 * closed).epsilon(1e-13));
  // Other windows, including one starting at zero.
  for (const AveragingWindow w : {AveragingWindow{5.0, 0.0, 0.0},
                                  AveragingWindow{20.0, 15.0, 0.0},
                                  AveragingWindow{1.0, 0.25, 0.0}}) {
    CHECK(window_mean_ground(w, kResp) ==
          doctest::Approx(window_mean_oracle(w, kResp, std::nullopt)).epsilon(1e-11));
  }
}

TEST_CASE("excited window mean: all decay-time regimes vs quadrature") {
  // Decay before the window, inside it, and after it.
  for (const double t_d : {0.0, 0.5, 2.0, 3.3, 4.0, 5.0, 8.0, 12.0, 13.5, 13.9, 20.0}) {
    CHECK(window_mean_excited(kWin, kResp, t_d) ==
          doctest::Approx(window_mean_oracle(kWin, kResp, std::min(t_d, kWin.t_ro_us)))
              .epsilon(1e-11));
  }
  // Spot values.
  CHECK(window_mean_excited(kWin, kResp, 0.5) == doctest::Approx(17.9011).epsilon(2e-5));
  CHECK(window_mean_excited(kWin, kResp, 3.3) == doctest::Approx(42.1999).epsilon(2e-5));
  CHECK(window_mean_excited(kWin, kResp, 5.0) == doctest::Approx(58.4736).epsilon(2e-5));
  CHECK(window_mean_excited(kWin, kResp, 8.0) == doctest::Approx(82.6458).epsilon(2e-5));
  CHECK(window_mean_excited(kWin, kResp, 12.0) == doctest::Approx(102.5069).epsilon(2e-5));
  // No decay during the pulse: any t_d >= t_RO clamps to the survivor mean.
  const double survivor = window_mean_excited(kWin, kResp, kWin.t_ro_us);
  CHECK(survivor == doctest::Approx(105.1737).epsilon(2e-5));
  CHECK(window_mean_excited(kWin, kResp, 50.0) == survivor);
  // Immediate decay reproduces the ground mean.
  CHECK(window_mean_excited(kWin, kResp, 0.0) ==
        doctest::Approx(window_mean_ground(kWin, kResp)).epsilon(1e-12));
  // Monotone in t_d (later decay = more absorbed energy).
  double prev = -1.0;
  for (double t_d = 0.0; t_d <= 14.0; t_d += 0.25) {
    const double m = window_mean_excited(kWin, kResp, t_d);
    CHECK(m >= prev);
    prev = m;
  }
}

TEST_CASE("window sigma and noise PSD round trip") {
  const NoiseModel noise{3209.256};
  CHECK(window_sigma(kWin, noise) == doctest::Approx(17.4).epsilon(1e-12));
  CHECK(noise_psd_for_sigma(17.4, 10.6) == doctest::Approx(3209.256).epsilon(1e-12));
  CHECK(window_sigma(kWin, NoiseModel{0.0}) == 0.0);
  // sigma ~ 1/sqrt(T): quadrupling the window halves the noise.
  const AveragingWindow w1{4.0, 3.0, 0.0};
  const AveragingWindow w4{7.0, 3.0, 0.0};
  CHECK(window_sigma(w1, noise) == doctest::Approx(2.0 * window_sigma(w4, noise)).epsilon(1e-12));
}

TEST_CASE("model input validation") {
  CHECK_THROWS_AS((BolometerResponse{1.0, 2.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((BolometerResponse{1.0, 2.0, -1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((AveragingWindow{5.0, 5.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((AveragingWindow{5.0, 6.0, 0.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((AveragingWindow{5.0, 1.0, -0.5}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((QubitDecayModel{0.0, 0.1}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((QubitDecayModel{10.0, 1.5}.validate()), std::invalid_argument);
  CHECK_THROWS_AS((NoiseModel{-1.0}.validate()), std::invalid_argument);
  CHECK_THROWS_AS(window_mean_excited(kWin, kResp, -0.1), std::invalid_argument);
}

TEST_CASE("normal pdf/cdf against the series erf oracle") {
  for (double x = -4.0; x <= 4.0; x += 0.37) {
    const double want = 0.5 * (1.0 + ts::erf_series(x / std::sqrt(2.0)));
    CHECK(normal_cdf(x, 0.0, 1.0) == doctest::Approx(want).epsilon(1e-13));
  }
  // Location-scale reduction.
  CHECK(normal_cdf(7.0, 3.0, 2.0) == doctest::Approx(normal_cdf(2.0, 0.0, 1.0)).epsilon(1e-14));
  // pdf integrates to the cdf difference.
  const QuadratureResult q =
      integrate_adaptive([](double x) { return normal_pdf(x, 1.0, 2.5); }, -3.0, 4.0,
                         1e-13, 1e-13);
  CHECK(q.value ==
        doctest::Approx(normal_cdf(4.0, 1.0, 2.5) - normal_cdf(-3.0, 1.0, 2.5))
            .epsilon(1e-11));
}

TEST_CASE("inverse error function") {
  CHECK(erf_inv(0.0) == 0.0);
  // Round trip through the independent series erf.
  for (double y = -0.9999; y <= 0.9999; y += 0.0613) {
    const double x = erf_inv(y);
    CHECK(ts::erf_series(x) == doctest::Approx(y).epsilon(1e-12));
  }
  // erf(1) is a known constant.
  CHECK(erf_inv(0.8427007929497149) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(std::isinf(erf_inv(1.0)));
  CHECK(std::isinf(erf_inv(-1.0)));
  CHECK(erf_inv(1.0) > 0.0);
  CHECK(erf_inv(-1.0) < 0.0);
  CHECK_THROWS_AS(erf_inv(1.0001), std::invalid_argument);
  CHECK_THROWS_AS(erf_inv(-2.0), std::invalid_argument);
}

TEST_CASE("adaptive quadrature: exact values, tolerances, failure modes") {
  const QuadratureResult s =
      integrate_adaptive([](double x) { return std::sin(x); }, 0.0,
                         3.14159265358979323846, 1e-13, 1e-13);
  CHECK(s.value == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(std::abs(s.value - 2.0) <= std::max(s.error_estimate, 1e-13));

  // A full Gaussian integrates to 1 even over a wide interval.
  const QuadratureResult g = integrate_adaptive(
      [](double x) { return normal_pdf(x, 0.0, 1.0); }, -9.0, 9.0, 1e-12, 0.0);
  CHECK(g.value == doctest::Approx(1.0).epsilon(1e-11));

  // Narrow feature away from the interval midpoint still gets found.
  const QuadratureResult spike = integrate_adaptive(
      [](double x) { return normal_pdf(x, 0.97, 0.05); }, 0.0, 10.0, 1e-10, 0.0);
  CHECK(spike.value == doctest::Approx(1.0).epsilon(1e-8));

  // Exhausting the segment budget is an error, not a wrong answer.
  CHECK_THROWS_AS(integrate_adaptive([](double x) { return normal_pdf(x, 0.5, 0.01); },
                                     0.0, 1.0, 1e-14, 0.0, 3),
                  QuadratureError);
  // Non-finite integrand values are rejected.
  CHECK_THROWS_AS(integrate_adaptive([](double x) { return 1.0 / x; }, -1.0, 1.0,
                                     1e-10, 0.0),
                  QuadratureError);
  // Inverted bounds are rejected (forward orientation only).
  CHECK_THROWS_AS(integrate_adaptive([](double) { return 1.0; }, 2.0, 1.0, 1e-10, 0.0),
                  std::invalid_argument);
}
