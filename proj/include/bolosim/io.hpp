#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "json.hpp"

#include "bolosim/signal_proc.hpp"
#include "bolosim/trace_sim.hpp"
#include "bolosim/types.hpp"

namespace bolo {

// Results documents keep their keys in insertion order so re-runs produce
// byte-identical files.
using OrderedJson = nlohmann::ordered_json;

// "lo:hi:count" axis specification for the landscape grid.
struct GridSpec {
  double lo = 0.0;
  double hi = 0.0;
  int count = 0;

  Eigen::ArrayXd axis() const;
  void validate(const char* name) const;
};

GridSpec parse_grid_spec(const std::string& text);

// Full run configuration. Defaults are the flagship characterization values;
// every field maps to one `key = value` line in the config format.
struct RunConfig {
  BolometerResponse resp{24.7, 182.0, 9.4};
  QubitDecayModel qubit{25.8, 0.20};
  NoiseModel noise{3209.256}; // sigma = 17.4 mV over the 10.6 us window
  AveragingWindow win{13.9, 3.3, 0.0};
  BaselineMode baseline_mode = BaselineMode::common;
  double common_baseline_mV = 0.0;
  std::uint64_t shots_ground = 10000;
  std::uint64_t shots_excited = 10000;
  double duration_us = 0.0; // 0 -> pre_pulse + t_ro
  double dt_us = 0.05;
  double pre_pulse_us = 0.0;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  GridSpec grid_t_ro{2.0, 40.0, 30};
  GridSpec grid_averaging{1.0, 30.0, 30};
  std::uint64_t n_traces = 1000;
  std::string fit_method = "wlsq"; // wlsq | mle
  double bin_width_mV = 0.0;       // 0 -> Scott's rule
  std::optional<double> decay_free_reference;
  bool write_traces = false;
  ExperimentMetadata meta{5.4, -107.8, 580.5, -128.7, ""};

  double effective_duration_us() const {
    return duration_us > 0.0 ? duration_us : pre_pulse_us + win.t_ro_us;
  }
  SimulationSetup to_setup() const;
  void validate() const;
};

// Flat `key = value` configuration text with `#` comments. Unknown keys and
// duplicate keys are errors (reported with line numbers). `averaging` may be
// given instead of `t0` (t0 = t_ro - averaging), but not both.
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

// Canonical rendering: every key, alphabetical, one per line, doubles with
// round-trip precision. parse(canonical(cfg)) == cfg.
std::string canonical_config_text(const RunConfig& cfg);

// FNV-1a (64-bit) over the canonical rendering of the *generative* keys only
// (model, noise, window, baseline, timing). Analysis-side settings, shot
// counts, and the seed do not change the hash, so datasets produced under the
// same physics are mutually compatible regardless of size or seed.
std::uint64_t config_hash(const RunConfig& cfg);
std::string format_hash(std::uint64_t hash);

// Round-trip decimal rendering of a double (%.17g).
std::string format_double(double v);

// ---- shot CSV ---------------------------------------------------------------
// Layout:
//   # config_hash=<16 hex digits>
//   shot_index,prepared_state,t_d_us,S_mV
//   0,ground,,14.212...
// t_d_us is empty when no decay time was recorded for the shot.

struct ShotsFile {
  std::vector<ShotRecord> shots;
  std::optional<std::uint64_t> config_hash;
};

void write_shots_csv(const std::filesystem::path& path,
                     const std::vector<ShotRecord>& shots,
                     std::optional<std::uint64_t> hash);
ShotsFile read_shots_csv(const std::filesystem::path& path);

// ---- trace binary -----------------------------------------------------------
// Magic "BOLO1", then little-endian: u32 sample count, f64 dt_us,
// f64 t_pulse_start_us, u8 channel count (1 or 2), then row-major f64 payload.

struct TraceFileData {
  double dt_us = 0.0;
  double t_pulse_start_us = 0.0;
  int channels = 1;
  Eigen::MatrixXd samples; // count x channels
};

void write_trace_file(const std::filesystem::path& path, const Trace& trace);
void write_trace_file(const std::filesystem::path& path, const IqTrace& trace,
                      double t_pulse_start_us);
TraceFileData read_trace_file(const std::filesystem::path& path);
Trace trace_from_file_data(const TraceFileData& data);
IqTrace iq_from_file_data(const TraceFileData& data);

// ---- trace-set manifest -------------------------------------------------------
// Sidecar JSON tying a directory of trace files to the generating config.

struct TraceSetManifest {
  std::uint64_t config_hash = 0;
  double dt_us = 0.0;
  double pre_pulse_us = 0.0;
  double duration_us = 0.0;
  BaselineMode baseline_mode = BaselineMode::common;
  double common_baseline_mV = 0.0;
  double t_base_us = 0.0;
  struct Entry {
    std::string file;
    PreparedState state = PreparedState::ground;
    std::uint64_t shot_index = 0;
  };
  std::vector<Entry> entries;
};

void write_traces_manifest(const std::filesystem::path& path,
                           const TraceSetManifest& manifest);
TraceSetManifest read_traces_manifest(const std::filesystem::path& path);

// ---- results documents --------------------------------------------------------

// Structured echo of the configuration (same keys as the config format).
OrderedJson config_json(const RunConfig& cfg);

// Tool name/version, timestamp (SOURCE_DATE_EPOCH honored for reproducible
// builds), seed, and config hash.
OrderedJson provenance_json(const RunConfig& cfg,
                            std::optional<std::uint64_t> seed_used);

std::string iso8601_utc_timestamp();

void write_text_file(const std::filesystem::path& path, const std::string& text);
void write_json_file(const std::filesystem::path& path, const OrderedJson& doc);

// Stages output files as <name>.tmp in the target directory; commit() renames
// them into place, and anything uncommitted is removed on destruction, so a
// failed command leaves no partial outputs.
class OutputStager {
 public:
  explicit OutputStager(std::filesystem::path dir);
  OutputStager(const OutputStager&) = delete;
  OutputStager& operator=(const OutputStager&) = delete;
  ~OutputStager();

  std::filesystem::path stage(const std::string& filename);
  void commit();
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  std::vector<std::pair<std::filesystem::path, std::filesystem::path>> pending_;
};

} // namespace bolo
