#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <optional>
#include <vector>

#include "bolosim/rng.hpp"
#include "bolosim/types.hpp"

namespace bolo {

enum class PreparedState { ground, excited };
enum class BaselineMode { per_shot, common };

// One digitized voltage trace. Sample k covers [k*dt, (k+1)*dt) and carries
// the value at the interval midpoint; the pulse turns on at t_pulse_start,
// before which the noiseless signal is identically zero.
struct Trace {
  double dt_us = 0.0;
  double t_pulse_start_us = 0.0;
  Eigen::ArrayXd samples; // mV

  double duration_us() const { return dt_us * static_cast<double>(samples.size()); }

  void validate() const {
    if (!(dt_us > 0.0)) throw std::invalid_argument("Trace: dt must be > 0");
    if (samples.size() == 0) throw std::invalid_argument("Trace: samples empty");
    if (!(t_pulse_start_us >= 0.0) || t_pulse_start_us >= duration_us())
      throw std::invalid_argument("Trace: pulse start outside the trace");
  }
};

// One shot reduced to its scalar signal. t_d is recorded only when the shot
// was prepared excited and the decay happened within the simulated pulse
// window.
struct ShotRecord {
  std::uint64_t shot_index = 0;
  PreparedState prepared_state = PreparedState::ground;
  std::optional<double> t_d_us;
  double s_mV = 0.0;
};

// Everything needed to simulate and reduce one shot. The trace covers
// [0, duration]; the pulse starts at pre_pulse (leaving room for the per-shot
// baseline window); the signal window is measured from pulse onset.
struct SimulationSetup {
  BolometerResponse resp;
  QubitDecayModel qubit;
  NoiseModel noise;
  AveragingWindow win;
  double duration_us = 0.0;
  double dt_us = 0.05;
  double pre_pulse_us = 0.0;
  double common_baseline_mV = 0.0;

  void validate() const;
};

// Exponential decay-time variate with mean T1, deterministic per SeedSpec.
double sample_decay_time(const QubitDecayModel& qubit, SeedSpec seed);

// Euler-Maruyama realization of dv = u dt + sqrt(P_N) dW: per-sample noise is
// N(0, sqrt(P_N/dt)), which makes boxcar means over a window of length T come
// out N(mean, sqrt(P_N/T)) exactly. For excited preparation, with probability
// P_x the ground dynamics are used (preparation error); otherwise a decay time
// is drawn and u_e(., t_d) is used.
Trace simulate_trace(PreparedState prepared, const BolometerResponse& resp,
                     const QubitDecayModel& qubit, const NoiseModel& noise,
                     double duration_us, double dt_us, SeedSpec seed,
                     double pre_pulse_us = 0.0);

// Boxcar signal per the window definition: S = Vbar - Vbar0, where Vbar
// averages [t0, t_RO] after pulse onset and Vbar0 is either the per-shot
// average over the t_base interval preceding the pulse or the supplied common
// value.
double extract_signal(const Trace& trace, const AveragingWindow& win,
                      BaselineMode mode,
                      std::optional<double> common_baseline_mV = std::nullopt);

// n independent shots with global indices [index_offset, index_offset + n).
// Each shot derives its stream from (master_seed, shot_index), so the result
// is byte-identical for any worker count. threads <= 0 selects the hardware
// concurrency.
std::vector<ShotRecord> simulate_shot_batch(std::size_t n, PreparedState prepared,
                                            const SimulationSetup& setup,
                                            BaselineMode mode,
                                            std::uint64_t master_seed,
                                            int threads = 0,
                                            std::uint64_t index_offset = 0);

// Same shot-level protocol, but keeping the full traces (landscape input).
std::vector<Trace> simulate_trace_batch(std::size_t n, PreparedState prepared,
                                        const SimulationSetup& setup,
                                        std::uint64_t master_seed,
                                        int threads = 0,
                                        std::uint64_t index_offset = 0);

} // namespace bolo
