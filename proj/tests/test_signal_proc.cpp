#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>

#include "bolosim/fidelity.hpp"
#include "bolosim/rng.hpp"
#include "bolosim/signal_proc.hpp"
#include "support/stats.hpp"

using namespace bolo;
namespace ts = testsupport;

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kFif = 70.3125;  // MHz
constexpr double kRate = 250.0;   // MS/s

// Mean I/Q over the settled part of a demodulated trace (skip the filter
// settling interval at the head).
std::pair<double, double> settled_iq(const IqTrace& iq, int skip) {
  const Eigen::Index n = iq.samples.rows();
  REQUIRE(n > skip + 8);
  const double mi = iq.samples.col(0).tail(n - skip).mean();
  const double mq = iq.samples.col(1).tail(n - skip).mean();
  return {mi, mq};
}

} // namespace

TEST_CASE("synthesize_tone evaluates A*cos(2*pi*f*t + phi) on the sample grid") {
  const double A = 3.25, f = 12.5, rate = 100.0, phi = 0.4;
  const Eigen::ArrayXd x = synthesize_tone(A, f, rate, 2.0, phi);
  CHECK(x.size() == 200);
  for (Eigen::Index k : {0, 1, 17, 199}) {
    const double t = static_cast<double>(k) / rate;
    CHECK(x[k] == doctest::Approx(A * std::cos(2.0 * kPi * f * t + phi)).epsilon(1e-12));
  }
  CHECK(x.abs().maxCoeff() <= A + 1e-12);

  CHECK_THROWS_AS(synthesize_tone(1.0, 10.0, 0.0, 1.0), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_tone(1.0, 10.0, 100.0, 0.0), std::invalid_argument);
}

TEST_CASE("demodulating a pure tone recovers its amplitude and phase") {
  const double A = 7.5;
  const std::vector<double> phases = {0.0, kPi / 6, -kPi / 3, 2.1};
  for (double phi : phases) {
    const Eigen::ArrayXd x = synthesize_tone(A, kFif, kRate, 4.0, phi);
    const IqTrace iq = digital_demodulate(x, kFif, kRate);
    iq.validate();
    CHECK(iq.dt_us == doctest::Approx(1.0 / kRate).epsilon(1e-15));
    CHECK(iq.samples.rows() == x.size());

    const auto [mi, mq] = settled_iq(iq, 8);
    // A*cos(2*pi*f*t + phi) -> (A/2*cos(phi), A/2*sin(phi)).
    const double amp = 2.0 * std::hypot(mi, mq);
    const double ang = std::atan2(mq, mi);
    CHECK(amp == doctest::Approx(A).epsilon(1e-3));
    CHECK(std::remainder(ang - phi, 2.0 * kPi) == doctest::Approx(0.0).scale(1.0).epsilon(2e-3));
  }
}

TEST_CASE("demodulation is linear: a scaled tone scales I/Q") {
  const Eigen::ArrayXd x1 = synthesize_tone(1.0, kFif, kRate, 2.0, 0.7);
  const IqTrace a = digital_demodulate(x1, kFif, kRate);
  const IqTrace b = digital_demodulate((3.0 * x1).eval(), kFif, kRate);
  CHECK(((b.samples - 3.0 * a.samples).abs().maxCoeff()) < 1e-12);
}

TEST_CASE("demodulating a noisy tone still recovers the amplitude") {
  const double A = 5.0;
  Eigen::ArrayXd x = synthesize_tone(A, kFif, kRate, 8.0, 0.9);
  ShotRng rng({2026, 17});
  for (Eigen::Index k = 0; k < x.size(); ++k) x[k] += 0.3 * rng.normal();
  const IqTrace iq = digital_demodulate(x, kFif, kRate);
  const auto [mi, mq] = settled_iq(iq, 8);
  CHECK(2.0 * std::hypot(mi, mq) == doctest::Approx(A).epsilon(0.01));
}

TEST_CASE("demodulation rejects empty input and sub-Nyquist rates") {
  CHECK_THROWS_AS(digital_demodulate(Eigen::ArrayXd(), 10.0, 100.0),
                  std::invalid_argument);
  const Eigen::ArrayXd x = synthesize_tone(1.0, 10.0, 100.0, 1.0);
  CHECK_THROWS_AS(digital_demodulate(x, 60.0, 100.0), std::invalid_argument);
  CHECK_THROWS_AS(digital_demodulate(x, 50.0, 100.0), std::invalid_argument); // == 2f
}

TEST_CASE("boxcar downsampling averages disjoint blocks and drops the tail") {
  SUBCASE("IQ variant") {
    IqTrace t;
    t.dt_us = 0.1;
    t.samples.resize(7, 2);
    for (Eigen::Index k = 0; k < 7; ++k) {
      t.samples(k, 0) = static_cast<double>(k);
      t.samples(k, 1) = 10.0 * static_cast<double>(k);
    }
    const IqTrace d = boxcar_downsample(t, 3);
    CHECK(d.dt_us == doctest::Approx(0.3).epsilon(1e-15));
    REQUIRE(d.samples.rows() == 2); // 7 / 3 = 2 blocks, one sample dropped
    CHECK(d.samples(0, 0) == doctest::Approx(1.0).epsilon(1e-15));  // mean(0,1,2)
    CHECK(d.samples(1, 0) == doctest::Approx(4.0).epsilon(1e-15));  // mean(3,4,5)
    CHECK(d.samples(0, 1) == doctest::Approx(10.0).epsilon(1e-15));
    CHECK(d.samples(1, 1) == doctest::Approx(40.0).epsilon(1e-15));

    CHECK_THROWS_AS(boxcar_downsample(t, 0), std::invalid_argument);
    CHECK_THROWS_AS(boxcar_downsample(t, 8), std::invalid_argument);
  }

  SUBCASE("scalar-trace variant preserves the pulse-start stamp") {
    Trace t;
    t.dt_us = 0.5;
    t.t_pulse_start_us = 1.0;
    t.samples.resize(6);
    t.samples << 2, 4, 6, 8, 10, 12;
    const Trace d = boxcar_downsample(t, 2);
    CHECK(d.dt_us == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(d.t_pulse_start_us == 1.0);
    REQUIRE(d.samples.size() == 3);
    CHECK(d.samples[0] == doctest::Approx(3.0).epsilon(1e-15));
    CHECK(d.samples[2] == doctest::Approx(11.0).epsilon(1e-15));
    CHECK_THROWS_AS(boxcar_downsample(t, -1), std::invalid_argument);
  }

  SUBCASE("n = 1 is the identity") {
    IqTrace t;
    t.dt_us = 0.2;
    t.samples = Eigen::ArrayX2d::Random(9, 2);
    const IqTrace d = boxcar_downsample(t, 1);
    CHECK(d.dt_us == t.dt_us);
    CHECK(((d.samples - t.samples).abs().maxCoeff()) == 0.0);
  }
}

TEST_CASE("IQ rotation is an isometry and composes additively") {
  Eigen::ArrayX2d pts = Eigen::ArrayX2d::Random(40, 2) * 5.0;

  SUBCASE("lengths and pairwise distances are preserved") {
    const Eigen::ArrayX2d r = rotate(pts, 0.83);
    const Eigen::ArrayXd n0 = (pts.col(0).square() + pts.col(1).square()).sqrt();
    const Eigen::ArrayXd n1 = (r.col(0).square() + r.col(1).square()).sqrt();
    CHECK(((n1 - n0).abs().maxCoeff()) < 1e-12);
  }

  SUBCASE("rotate(a) then rotate(b) equals rotate(a + b)") {
    const Eigen::ArrayX2d ab = rotate(rotate(pts, 0.4), -1.1);
    const Eigen::ArrayX2d once = rotate(pts, -0.7);
    CHECK(((ab - once).abs().maxCoeff()) < 1e-12);
  }

  SUBCASE("quarter turn maps (x, y) to (-y, x)") {
    Eigen::ArrayX2d p(1, 2);
    p << 2.0, 3.0;
    const Eigen::ArrayX2d r = rotate(p, kPi / 2);
    CHECK(r(0, 0) == doctest::Approx(-3.0).epsilon(1e-12));
    CHECK(r(0, 1) == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("IqTrace variant rotates the sample matrix and keeps dt") {
    IqTrace t;
    t.dt_us = 0.25;
    t.samples = pts;
    const IqTrace r = rotate(t, 1.3);
    CHECK(r.dt_us == t.dt_us);
    CHECK(((r.samples - rotate(pts, 1.3)).abs().maxCoeff()) == 0.0);
  }
}

TEST_CASE("fit_common_rotation recovers the angle that separates rotated clouds") {
  // Clouds separated along a known axis with large transverse noise, rotated
  // away by a fixed angle: any mis-rotation mixes the big transverse spread
  // into I, so the optimum angle is sharply identified (mod pi).
  const double true_angle = -35.0 * kPi / 180.0;
  const Eigen::Index n = 400;
  ShotRng rng({77, 0});

  Eigen::ArrayX2d g(n, 2), e(n, 2);
  for (Eigen::Index k = 0; k < n; ++k) {
    g(k, 0) = 0.0 + 0.4 * rng.normal();
    g(k, 1) = 8.0 * rng.normal();
    e(k, 0) = 2.5 + 0.4 * rng.normal();
    e(k, 1) = 8.0 * rng.normal();
  }
  // Rotate the separation axis away; the fit should rotate it back.
  const Eigen::ArrayX2d gr = rotate(g, -true_angle);
  const Eigen::ArrayX2d er = rotate(e, -true_angle);

  const RotationFit fit = fit_common_rotation(gr, er);
  CHECK(!fit.degenerate);
  CHECK(fit.fidelity > 0.95);
  // The objective is pi-periodic; compare modulo pi.
  const double diff = std::remainder(fit.angle_rad - true_angle, kPi);
  CHECK(std::abs(diff) < 0.1);

  // The rotated-I separation achieved at the fitted angle matches the
  // reported fidelity...
  const Eigen::ArrayXd gi = rotate(gr, fit.angle_rad).col(0);
  const Eigen::ArrayXd ei = rotate(er, fit.angle_rad).col(0);
  CHECK(optimal_threshold(gi, ei).fidelity == doctest::Approx(fit.fidelity).epsilon(1e-9));

  // ...and the maximizer is at least as good as the true angle on this data.
  const Eigen::ArrayXd gi0 = rotate(gr, true_angle).col(0);
  const Eigen::ArrayXd ei0 = rotate(er, true_angle).col(0);
  CHECK(fit.fidelity >= optimal_threshold(gi0, ei0).fidelity - 1e-6);
}

TEST_CASE("fit_common_rotation flags inseparable clouds as degenerate") {
  Eigen::ArrayX2d same = Eigen::ArrayX2d::Random(50, 2);
  const RotationFit fit = fit_common_rotation(same, same);
  CHECK(fit.degenerate);
  CHECK(fit.fidelity <= 0.05);
}
