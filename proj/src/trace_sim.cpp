#include "bolosim/trace_sim.hpp"

#include <cmath>
#include <stdexcept>
#include <thread>

#include "bolosim/model.hpp"

namespace bolo {

void SimulationSetup::validate() const {
  resp.validate();
  qubit.validate();
  noise.validate();
  win.validate();
  if (!(dt_us > 0.0) || !(duration_us >= dt_us))
    throw std::invalid_argument("SimulationSetup: require dt > 0 and duration >= dt");
  if (!(pre_pulse_us >= 0.0) || pre_pulse_us >= duration_us)
    throw std::invalid_argument("SimulationSetup: pulse start outside the trace");
  if (pre_pulse_us + win.t_ro_us > duration_us + 1e-9)
    throw std::invalid_argument("SimulationSetup: averaging window exceeds the trace");
  if (win.t_base_us > pre_pulse_us + 1e-9)
    throw std::invalid_argument("SimulationSetup: baseline window precedes the trace");
}

double sample_decay_time(const QubitDecayModel& qubit, SeedSpec seed) {
  qubit.validate();
  ShotRng rng(seed);
  return rng.exponential(qubit.t1_us);
}

namespace {

struct StateDraw {
  bool ground_dynamics = true;
  double t_d_us = 0.0; // meaningful only when !ground_dynamics
};

// Draw order is part of the determinism contract: preparation-error Bernoulli
// first, then the decay time, then per-sample noise.
StateDraw draw_initial_state(const QubitDecayModel& qubit, PreparedState prepared,
                             ShotRng& rng) {
  StateDraw d;
  if (prepared == PreparedState::excited) {
    d.ground_dynamics = rng.bernoulli(qubit.p_x);
    if (!d.ground_dynamics) d.t_d_us = rng.exponential(qubit.t1_us);
  }
  return d;
}

Trace build_trace(const StateDraw& draw, const BolometerResponse& resp,
                  const NoiseModel& noise, double duration_us, double dt_us,
                  double pre_pulse_us, ShotRng& rng) {
  const auto n = static_cast<Eigen::Index>(std::llround(duration_us / dt_us));
  if (n < 1) throw std::invalid_argument("simulate_trace: fewer than one sample");

  Trace tr;
  tr.dt_us = dt_us;
  tr.t_pulse_start_us = pre_pulse_us;
  tr.samples.resize(n);

  // Sample midpoints relative to pulse onset; zero signal before the pulse.
  Eigen::ArrayXd t_model =
      (Eigen::ArrayXd::LinSpaced(n, 0.5, static_cast<double>(n) - 0.5) * dt_us) -
      pre_pulse_us;
  Eigen::ArrayXd clamped = t_model.max(0.0);
  Eigen::ArrayXd u = draw.ground_dynamics
                         ? noiseless_response_ground(clamped, resp)
                         : noiseless_response_excited(clamped, draw.t_d_us, resp);
  tr.samples = (t_model < 0.0).select(0.0, u);

  if (noise.psd_mV2us > 0.0) {
    const double sigma_sample = std::sqrt(noise.psd_mV2us / dt_us);
    for (Eigen::Index i = 0; i < n; ++i)
      tr.samples[i] += sigma_sample * rng.normal();
  }
  return tr;
}

} // namespace

Trace simulate_trace(PreparedState prepared, const BolometerResponse& resp,
                     const QubitDecayModel& qubit, const NoiseModel& noise,
                     double duration_us, double dt_us, SeedSpec seed,
                     double pre_pulse_us) {
  resp.validate();
  qubit.validate();
  noise.validate();
  if (!(dt_us > 0.0) || !(duration_us >= dt_us))
    throw std::invalid_argument("simulate_trace: require dt > 0 and duration >= dt");
  if (!(pre_pulse_us >= 0.0) || pre_pulse_us >= duration_us)
    throw std::invalid_argument("simulate_trace: pulse start outside the trace");

  ShotRng rng(seed);
  const StateDraw draw = draw_initial_state(qubit, prepared, rng);
  return build_trace(draw, resp, noise, duration_us, dt_us, pre_pulse_us, rng);
}

double extract_signal(const Trace& trace, const AveragingWindow& win,
                      BaselineMode mode, std::optional<double> common_baseline_mV) {
  trace.validate();
  win.validate();
  const auto n = trace.samples.size();
  auto edge_index = [&](double t_abs_us) {
    return static_cast<Eigen::Index>(std::llround(t_abs_us / trace.dt_us));
  };

  const Eigen::Index first = edge_index(trace.t_pulse_start_us + win.t0_us);
  const Eigen::Index last = edge_index(trace.t_pulse_start_us + win.t_ro_us);
  if (first < 0 || last > n || first >= last)
    throw std::invalid_argument("extract_signal: averaging window exceeds trace bounds");
  const double v_bar = trace.samples.segment(first, last - first).mean();

  double v_baseline;
  if (mode == BaselineMode::per_shot) {
    if (!(win.t_base_us > 0.0))
      throw std::invalid_argument("extract_signal: per-shot baseline requires t_base > 0");
    const Eigen::Index b_first = edge_index(trace.t_pulse_start_us - win.t_base_us);
    const Eigen::Index b_last = edge_index(trace.t_pulse_start_us);
    if (b_first < 0 || b_last > n || b_first >= b_last)
      throw std::invalid_argument("extract_signal: baseline window exceeds trace bounds");
    v_baseline = trace.samples.segment(b_first, b_last - b_first).mean();
  } else {
    v_baseline = common_baseline_mV.value_or(0.0);
  }
  return v_bar - v_baseline;
}

namespace {

// Shared worker pattern for the two batch entry points: results are written by
// global index, so assembly order never depends on scheduling.
template <typename PerShot>
void run_batch(std::size_t n, int threads, const PerShot& body) {
  unsigned worker_count = threads > 0
                              ? static_cast<unsigned>(threads)
                              : std::max(1u, std::thread::hardware_concurrency());
  worker_count = static_cast<unsigned>(
      std::min<std::size_t>(worker_count, std::max<std::size_t>(n, 1)));
  if (worker_count <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(worker_count);
  for (unsigned w = 0; w < worker_count; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += worker_count) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

} // namespace

std::vector<ShotRecord> simulate_shot_batch(std::size_t n, PreparedState prepared,
                                            const SimulationSetup& setup,
                                            BaselineMode mode,
                                            std::uint64_t master_seed, int threads,
                                            std::uint64_t index_offset) {
  if (n < 1) throw std::invalid_argument("simulate_shot_batch: n must be >= 1");
  setup.validate();
  if (mode == BaselineMode::per_shot && !(setup.win.t_base_us > 0.0))
    throw std::invalid_argument("simulate_shot_batch: per-shot baseline requires t_base > 0");

  const double horizon_us = setup.duration_us - setup.pre_pulse_us;
  std::vector<ShotRecord> records(n);
  run_batch(n, threads, [&](std::size_t i) {
    const std::uint64_t index = index_offset + i;
    ShotRng rng(SeedSpec{master_seed, index});
    const StateDraw draw = draw_initial_state(setup.qubit, prepared, rng);
    const Trace tr = build_trace(draw, setup.resp, setup.noise, setup.duration_us,
                                 setup.dt_us, setup.pre_pulse_us, rng);
    ShotRecord& rec = records[i];
    rec.shot_index = index;
    rec.prepared_state = prepared;
    if (prepared == PreparedState::excited && !draw.ground_dynamics &&
        draw.t_d_us < horizon_us)
      rec.t_d_us = draw.t_d_us;
    rec.s_mV = extract_signal(tr, setup.win, mode, setup.common_baseline_mV);
  });
  return records;
}

std::vector<Trace> simulate_trace_batch(std::size_t n, PreparedState prepared,
                                        const SimulationSetup& setup,
                                        std::uint64_t master_seed, int threads,
                                        std::uint64_t index_offset) {
  if (n < 1) throw std::invalid_argument("simulate_trace_batch: n must be >= 1");
  setup.validate();
  std::vector<Trace> traces(n);
  run_batch(n, threads, [&](std::size_t i) {
    const std::uint64_t index = index_offset + i;
    ShotRng rng(SeedSpec{master_seed, index});
    const StateDraw draw = draw_initial_state(setup.qubit, prepared, rng);
    traces[i] = build_trace(draw, setup.resp, setup.noise, setup.duration_us,
                            setup.dt_us, setup.pre_pulse_us, rng);
  });
  return traces;
}

} // namespace bolo
