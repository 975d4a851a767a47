#include "bolosim/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

#include "bolosim/version.hpp"

static_assert(std::endian::native == std::endian::little,
              "trace files are little-endian; big-endian hosts need byte swaps");

namespace bolo {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

[[noreturn]] void config_error(int line, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

double parse_double_or(const std::string& v, int line, const std::string& key) {
  double out = 0.0;
  const char* begin = v.data();
  const char* end = v.data() + v.size();
  const auto res = std::from_chars(begin, end, out);
  if (res.ec != std::errc() || res.ptr != end)
    config_error(line, "invalid number for '" + key + "': " + v);
  return out;
}

std::uint64_t parse_u64_or(const std::string& v, int line, const std::string& key) {
  std::uint64_t out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    config_error(line, "invalid integer for '" + key + "': " + v);
  return out;
}

int parse_int_or(const std::string& v, int line, const std::string& key) {
  int out = 0;
  const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
  if (res.ec != std::errc() || res.ptr != v.data() + v.size())
    config_error(line, "invalid integer for '" + key + "': " + v);
  return out;
}

bool parse_bool_or(const std::string& v, int line, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  config_error(line, "invalid boolean for '" + key + "': " + v);
}

const char* baseline_mode_name(BaselineMode mode) {
  return mode == BaselineMode::common ? "common" : "per_shot";
}

const char* state_name(PreparedState s) {
  return s == PreparedState::ground ? "ground" : "excited";
}

PreparedState parse_state(const std::string& v) {
  if (v == "ground") return PreparedState::ground;
  if (v == "excited") return PreparedState::excited;
  throw std::invalid_argument("unknown prepared_state: " + v);
}

// Little-endian primitive writers for the trace format.
void put_u32(std::ostream& os, std::uint32_t v) {
  char buf[4];
  std::memcpy(buf, &v, 4);
  os.write(buf, 4);
}

void put_f64(std::ostream& os, double v) {
  char buf[8];
  std::memcpy(buf, &v, 8);
  os.write(buf, 8);
}

std::uint32_t get_u32(std::istream& is) {
  char buf[4];
  is.read(buf, 4);
  std::uint32_t v = 0;
  std::memcpy(&v, buf, 4);
  return v;
}

double get_f64(std::istream& is) {
  char buf[8];
  is.read(buf, 8);
  double v = 0.0;
  std::memcpy(&v, buf, 8);
  return v;
}

void write_trace_header(std::ostream& os, std::uint32_t count, double dt_us,
                        double t_pulse_start_us, std::uint8_t channels) {
  os.write("BOLO1", 5);
  put_u32(os, count);
  put_f64(os, dt_us);
  put_f64(os, t_pulse_start_us);
  os.put(static_cast<char>(channels));
}

std::uint64_t fnv1a64(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const char c : text) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 1099511628211ULL;
  }
  return h;
}

// The generative subset: everything that shapes the per-shot signal
// distribution, and nothing that only selects how much data to produce or
// how to analyze it.
std::string generative_config_text(const RunConfig& cfg) {
  std::ostringstream os;
  os << "baseline_mode = " << baseline_mode_name(cfg.baseline_mode) << "\n"
     << "c_e = " << format_double(cfg.resp.c_e_mV) << "\n"
     << "c_g = " << format_double(cfg.resp.c_g_mV) << "\n"
     << "common_baseline = " << format_double(cfg.common_baseline_mV) << "\n"
     << "dt = " << format_double(cfg.dt_us) << "\n"
     << "duration = " << format_double(cfg.effective_duration_us()) << "\n"
     << "noise_psd = " << format_double(cfg.noise.psd_mV2us) << "\n"
     << "p_x = " << format_double(cfg.qubit.p_x) << "\n"
     << "pre_pulse = " << format_double(cfg.pre_pulse_us) << "\n"
     << "t0 = " << format_double(cfg.win.t0_us) << "\n"
     << "t1 = " << format_double(cfg.qubit.t1_us) << "\n"
     << "t_base = " << format_double(cfg.win.t_base_us) << "\n"
     << "t_ro = " << format_double(cfg.win.t_ro_us) << "\n"
     << "tau_b = " << format_double(cfg.resp.tau_b_us) << "\n";
  return os.str();
}

} // namespace

// ---- grid spec ---------------------------------------------------------------

Eigen::ArrayXd GridSpec::axis() const {
  validate("grid");
  if (count == 1) return Eigen::ArrayXd::Constant(1, lo);
  return Eigen::ArrayXd::LinSpaced(count, lo, hi);
}

void GridSpec::validate(const char* name) const {
  if (count < 1)
    throw std::invalid_argument(std::string(name) + ": count must be >= 1");
  if (!(lo <= hi))
    throw std::invalid_argument(std::string(name) + ": require lo <= hi");
  if (count > 1 && !(lo < hi))
    throw std::invalid_argument(std::string(name) + ": lo == hi needs count 1");
}

GridSpec parse_grid_spec(const std::string& text) {
  const auto c1 = text.find(':');
  const auto c2 = text.find(':', c1 == std::string::npos ? c1 : c1 + 1);
  if (c1 == std::string::npos || c2 == std::string::npos)
    throw std::invalid_argument("grid spec must be lo:hi:count, got '" + text + "'");
  GridSpec g;
  g.lo = parse_double_or(trim(text.substr(0, c1)), 0, "grid lo");
  g.hi = parse_double_or(trim(text.substr(c1 + 1, c2 - c1 - 1)), 0, "grid hi");
  g.count = parse_int_or(trim(text.substr(c2 + 1)), 0, "grid count");
  g.validate("grid");
  return g;
}

// ---- run config ----------------------------------------------------------------

SimulationSetup RunConfig::to_setup() const {
  SimulationSetup s;
  s.resp = resp;
  s.qubit = qubit;
  s.noise = noise;
  s.win = win;
  s.duration_us = effective_duration_us();
  s.dt_us = dt_us;
  s.pre_pulse_us = pre_pulse_us;
  s.common_baseline_mV = common_baseline_mV;
  return s;
}

void RunConfig::validate() const {
  to_setup().validate();
  if (baseline_mode == BaselineMode::per_shot && !(win.t_base_us > 0.0))
    throw std::invalid_argument("per_shot baseline mode requires t_base > 0");
  if (fit_method != "wlsq" && fit_method != "mle")
    throw std::invalid_argument("fit_method must be wlsq or mle");
  if (!(bin_width_mV >= 0.0))
    throw std::invalid_argument("bin_width must be >= 0");
  if (threads < 0) throw std::invalid_argument("threads must be >= 0");
  grid_t_ro.validate("grid_t_ro");
  grid_averaging.validate("grid_avg");
  if (decay_free_reference &&
      !(*decay_free_reference > 0.0 && *decay_free_reference <= 1.0))
    throw std::invalid_argument("decay_free_reference must be in (0, 1]");
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::optional<double> t0_value, averaging_value;
  std::set<std::string> seen;

  std::istringstream stream(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(stream, raw)) {
    ++line_no;
    const auto hash_pos = raw.find('#');
    if (hash_pos != std::string::npos) raw.erase(hash_pos);
    const std::string line = trim(raw);
    if (line.empty()) continue;

    const auto eq = line.find('=');
    if (eq == std::string::npos) config_error(line_no, "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (key.empty()) config_error(line_no, "empty key");
    if (!seen.insert(key).second) config_error(line_no, "duplicate key '" + key + "'");

    if (key == "c_g") cfg.resp.c_g_mV = parse_double_or(value, line_no, key);
    else if (key == "c_e") cfg.resp.c_e_mV = parse_double_or(value, line_no, key);
    else if (key == "tau_b") cfg.resp.tau_b_us = parse_double_or(value, line_no, key);
    else if (key == "t1") cfg.qubit.t1_us = parse_double_or(value, line_no, key);
    else if (key == "p_x") cfg.qubit.p_x = parse_double_or(value, line_no, key);
    else if (key == "noise_psd") cfg.noise.psd_mV2us = parse_double_or(value, line_no, key);
    else if (key == "t_ro") cfg.win.t_ro_us = parse_double_or(value, line_no, key);
    else if (key == "t0") t0_value = parse_double_or(value, line_no, key);
    else if (key == "averaging") averaging_value = parse_double_or(value, line_no, key);
    else if (key == "t_base") cfg.win.t_base_us = parse_double_or(value, line_no, key);
    else if (key == "baseline_mode") {
      if (value == "common") cfg.baseline_mode = BaselineMode::common;
      else if (value == "per_shot") cfg.baseline_mode = BaselineMode::per_shot;
      else config_error(line_no, "baseline_mode must be common or per_shot");
    } else if (key == "common_baseline")
      cfg.common_baseline_mV = parse_double_or(value, line_no, key);
    else if (key == "shots_ground") cfg.shots_ground = parse_u64_or(value, line_no, key);
    else if (key == "shots_excited") cfg.shots_excited = parse_u64_or(value, line_no, key);
    else if (key == "duration") cfg.duration_us = parse_double_or(value, line_no, key);
    else if (key == "dt") cfg.dt_us = parse_double_or(value, line_no, key);
    else if (key == "pre_pulse") cfg.pre_pulse_us = parse_double_or(value, line_no, key);
    else if (key == "seed") cfg.seed = parse_u64_or(value, line_no, key);
    else if (key == "threads") cfg.threads = parse_int_or(value, line_no, key);
    else if (key == "grid_t_ro") cfg.grid_t_ro = parse_grid_spec(value);
    else if (key == "grid_avg") cfg.grid_averaging = parse_grid_spec(value);
    else if (key == "n_traces") cfg.n_traces = parse_u64_or(value, line_no, key);
    else if (key == "fit_method") cfg.fit_method = value;
    else if (key == "bin_width") cfg.bin_width_mV = parse_double_or(value, line_no, key);
    else if (key == "decay_free_reference")
      cfg.decay_free_reference = parse_double_or(value, line_no, key);
    else if (key == "write_traces") cfg.write_traces = parse_bool_or(value, line_no, key);
    else if (key == "f_d") cfg.meta.f_d_GHz = parse_double_or(value, line_no, key);
    else if (key == "p_d") cfg.meta.p_d_dBm = parse_double_or(value, line_no, key);
    else if (key == "f_p") cfg.meta.f_p_MHz = parse_double_or(value, line_no, key);
    else if (key == "p_p") cfg.meta.p_p_dBm = parse_double_or(value, line_no, key);
    else if (key == "annotations") cfg.meta.annotations = value;
    else config_error(line_no, "unknown key '" + key + "'");
  }

  if (t0_value && averaging_value)
    throw std::invalid_argument("config: give t0 or averaging, not both");
  if (t0_value) cfg.win.t0_us = *t0_value;
  if (averaging_value) cfg.win.t0_us = cfg.win.t_ro_us - *averaging_value;
  return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open config file: " + path.string());
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_config_text(buf.str());
}

std::string canonical_config_text(const RunConfig& cfg) {
  std::ostringstream os;
  if (!cfg.meta.annotations.empty()) os << "annotations = " << cfg.meta.annotations << "\n";
  os << "baseline_mode = " << baseline_mode_name(cfg.baseline_mode) << "\n"
     << "bin_width = " << format_double(cfg.bin_width_mV) << "\n"
     << "c_e = " << format_double(cfg.resp.c_e_mV) << "\n"
     << "c_g = " << format_double(cfg.resp.c_g_mV) << "\n"
     << "common_baseline = " << format_double(cfg.common_baseline_mV) << "\n";
  if (cfg.decay_free_reference)
    os << "decay_free_reference = " << format_double(*cfg.decay_free_reference) << "\n";
  os << "dt = " << format_double(cfg.dt_us) << "\n"
     << "duration = " << format_double(cfg.duration_us) << "\n"
     << "f_d = " << format_double(cfg.meta.f_d_GHz) << "\n"
     << "f_p = " << format_double(cfg.meta.f_p_MHz) << "\n"
     << "fit_method = " << cfg.fit_method << "\n"
     << "grid_avg = " << format_double(cfg.grid_averaging.lo) << ":"
     << format_double(cfg.grid_averaging.hi) << ":" << cfg.grid_averaging.count << "\n"
     << "grid_t_ro = " << format_double(cfg.grid_t_ro.lo) << ":"
     << format_double(cfg.grid_t_ro.hi) << ":" << cfg.grid_t_ro.count << "\n"
     << "n_traces = " << cfg.n_traces << "\n"
     << "noise_psd = " << format_double(cfg.noise.psd_mV2us) << "\n"
     << "p_d = " << format_double(cfg.meta.p_d_dBm) << "\n"
     << "p_p = " << format_double(cfg.meta.p_p_dBm) << "\n"
     << "p_x = " << format_double(cfg.qubit.p_x) << "\n"
     << "pre_pulse = " << format_double(cfg.pre_pulse_us) << "\n";
  if (cfg.seed) os << "seed = " << *cfg.seed << "\n";
  os << "shots_excited = " << cfg.shots_excited << "\n"
     << "shots_ground = " << cfg.shots_ground << "\n"
     << "t0 = " << format_double(cfg.win.t0_us) << "\n"
     << "t1 = " << format_double(cfg.qubit.t1_us) << "\n"
     << "t_base = " << format_double(cfg.win.t_base_us) << "\n"
     << "t_ro = " << format_double(cfg.win.t_ro_us) << "\n"
     << "tau_b = " << format_double(cfg.resp.tau_b_us) << "\n"
     << "threads = " << cfg.threads << "\n"
     << "write_traces = " << (cfg.write_traces ? "true" : "false") << "\n";
  return os.str();
}

std::uint64_t config_hash(const RunConfig& cfg) {
  return fnv1a64(generative_config_text(cfg));
}

std::string format_hash(std::uint64_t hash) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
  return buf;
}

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// ---- shot CSV -------------------------------------------------------------------

void write_shots_csv(const std::filesystem::path& path,
                     const std::vector<ShotRecord>& shots,
                     std::optional<std::uint64_t> hash) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  if (hash) os << "# config_hash=" << format_hash(*hash) << "\n";
  os << "shot_index,prepared_state,t_d_us,S_mV\n";
  for (const ShotRecord& s : shots) {
    os << s.shot_index << ',' << state_name(s.prepared_state) << ',';
    if (s.t_d_us) os << format_double(*s.t_d_us);
    os << ',' << format_double(s.s_mV) << "\n";
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

ShotsFile read_shots_csv(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open " + path.string());
  ShotsFile out;
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  const std::string hash_prefix = "# config_hash=";
  const std::string header = "shot_index,prepared_state,t_d_us,S_mV";

  auto row_error = [&](const std::string& what) -> std::invalid_argument {
    return std::invalid_argument(path.string() + " line " + std::to_string(line_no) +
                                 ": " + what);
  };

  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind(hash_prefix, 0) == 0) {
        const std::string hex = trim(line.substr(hash_prefix.size()));
        std::uint64_t h = 0;
        const auto res = std::from_chars(hex.data(), hex.data() + hex.size(), h, 16);
        if (res.ec != std::errc() || res.ptr != hex.data() + hex.size())
          throw row_error("malformed config_hash");
        out.config_hash = h;
      }
      continue;
    }
    if (!header_seen) {
      if (line != header) throw row_error("expected header '" + header + "'");
      header_seen = true;
      continue;
    }

    std::array<std::string, 4> fields;
    std::size_t start = 0;
    int nf = 0;
    for (int f = 0; f < 4; ++f) {
      const auto comma = line.find(',', start);
      if (f < 3) {
        if (comma == std::string::npos) break;
        fields[static_cast<std::size_t>(f)] = line.substr(start, comma - start);
        start = comma + 1;
      } else {
        if (comma != std::string::npos) {
          nf = 5; // too many fields
          break;
        }
        fields[3] = line.substr(start);
      }
      nf = f + 1;
    }
    if (nf != 4) throw row_error("expected 4 comma-separated fields");

    ShotRecord rec;
    try {
      rec.shot_index = parse_u64_or(trim(fields[0]), line_no, "shot_index");
      rec.prepared_state = parse_state(trim(fields[1]));
      const std::string td = trim(fields[2]);
      if (!td.empty()) rec.t_d_us = parse_double_or(td, line_no, "t_d_us");
      rec.s_mV = parse_double_or(trim(fields[3]), line_no, "S_mV");
    } catch (const std::invalid_argument& e) {
      throw row_error(e.what());
    }
    out.shots.push_back(rec);
  }
  if (!header_seen)
    throw std::invalid_argument(path.string() + ": empty or missing header");
  return out;
}

// ---- trace binary ------------------------------------------------------------------

void write_trace_file(const std::filesystem::path& path, const Trace& trace) {
  trace.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_trace_header(os, static_cast<std::uint32_t>(trace.samples.size()),
                     trace.dt_us, trace.t_pulse_start_us, 1);
  for (Eigen::Index i = 0; i < trace.samples.size(); ++i) put_f64(os, trace.samples[i]);
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_trace_file(const std::filesystem::path& path, const IqTrace& trace,
                      double t_pulse_start_us) {
  trace.validate();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  write_trace_header(os, static_cast<std::uint32_t>(trace.samples.rows()),
                     trace.dt_us, t_pulse_start_us, 2);
  for (Eigen::Index i = 0; i < trace.samples.rows(); ++i) {
    put_f64(os, trace.samples(i, 0));
    put_f64(os, trace.samples(i, 1));
  }
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

TraceFileData read_trace_file(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::invalid_argument("cannot open " + path.string());
  char magic[5];
  is.read(magic, 5);
  if (!is || std::memcmp(magic, "BOLO1", 5) != 0)
    throw std::invalid_argument(path.string() + ": not a BOLO1 trace file");
  TraceFileData data;
  const std::uint32_t count = get_u32(is);
  data.dt_us = get_f64(is);
  data.t_pulse_start_us = get_f64(is);
  const int channels = is.get();
  if (!is) throw std::invalid_argument(path.string() + ": truncated header");
  if (channels != 1 && channels != 2)
    throw std::invalid_argument(path.string() + ": channel count must be 1 or 2");
  data.channels = channels;
  data.samples.resize(count, channels);
  for (std::uint32_t i = 0; i < count; ++i)
    for (int c = 0; c < channels; ++c) data.samples(i, c) = get_f64(is);
  if (!is) throw std::invalid_argument(path.string() + ": truncated payload");
  return data;
}

Trace trace_from_file_data(const TraceFileData& data) {
  if (data.channels != 1)
    throw std::invalid_argument("expected a 1-channel trace file");
  Trace t;
  t.dt_us = data.dt_us;
  t.t_pulse_start_us = data.t_pulse_start_us;
  t.samples = data.samples.col(0).array();
  t.validate();
  return t;
}

IqTrace iq_from_file_data(const TraceFileData& data) {
  if (data.channels != 2)
    throw std::invalid_argument("expected a 2-channel trace file");
  IqTrace t;
  t.dt_us = data.dt_us;
  t.samples = data.samples.array();
  t.validate();
  return t;
}

// ---- trace-set manifest ---------------------------------------------------------------

void write_traces_manifest(const std::filesystem::path& path,
                           const TraceSetManifest& manifest) {
  OrderedJson doc;
  doc["format"] = "bolosim-traces-1";
  doc["config_hash"] = format_hash(manifest.config_hash);
  doc["dt_us"] = manifest.dt_us;
  doc["pre_pulse_us"] = manifest.pre_pulse_us;
  doc["duration_us"] = manifest.duration_us;
  doc["baseline_mode"] = baseline_mode_name(manifest.baseline_mode);
  doc["common_baseline_mV"] = manifest.common_baseline_mV;
  doc["t_base_us"] = manifest.t_base_us;
  OrderedJson entries = OrderedJson::array();
  for (const auto& e : manifest.entries) {
    OrderedJson entry;
    entry["file"] = e.file;
    entry["state"] = state_name(e.state);
    entry["shot_index"] = e.shot_index;
    entries.push_back(entry);
  }
  doc["traces"] = entries;
  write_json_file(path, doc);
}

TraceSetManifest read_traces_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::invalid_argument("cannot open " + path.string());
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(is);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
  try {
    if (doc.at("format").get<std::string>() != "bolosim-traces-1")
      throw std::invalid_argument(path.string() + ": unknown manifest format");
    TraceSetManifest m;
    const std::string hex = doc.at("config_hash").get<std::string>();
    const auto res = std::from_chars(hex.data(), hex.data() + hex.size(), m.config_hash, 16);
    if (res.ec != std::errc() || res.ptr != hex.data() + hex.size())
      throw std::invalid_argument(path.string() + ": malformed config_hash");
    m.dt_us = doc.at("dt_us").get<double>();
    m.pre_pulse_us = doc.at("pre_pulse_us").get<double>();
    m.duration_us = doc.at("duration_us").get<double>();
    const std::string mode = doc.at("baseline_mode").get<std::string>();
    if (mode == "common") m.baseline_mode = BaselineMode::common;
    else if (mode == "per_shot") m.baseline_mode = BaselineMode::per_shot;
    else throw std::invalid_argument(path.string() + ": unknown baseline_mode");
    m.common_baseline_mV = doc.at("common_baseline_mV").get<double>();
    m.t_base_us = doc.at("t_base_us").get<double>();
    for (const auto& entry : doc.at("traces")) {
      TraceSetManifest::Entry e;
      e.file = entry.at("file").get<std::string>();
      e.state = parse_state(entry.at("state").get<std::string>());
      e.shot_index = entry.at("shot_index").get<std::uint64_t>();
      m.entries.push_back(e);
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(path.string() + ": " + e.what());
  }
}

// ---- results documents --------------------------------------------------------------------

OrderedJson config_json(const RunConfig& cfg) {
  OrderedJson j;
  j["c_g"] = cfg.resp.c_g_mV;
  j["c_e"] = cfg.resp.c_e_mV;
  j["tau_b"] = cfg.resp.tau_b_us;
  j["t1"] = cfg.qubit.t1_us;
  j["p_x"] = cfg.qubit.p_x;
  j["noise_psd"] = cfg.noise.psd_mV2us;
  j["t_ro"] = cfg.win.t_ro_us;
  j["t0"] = cfg.win.t0_us;
  j["t_base"] = cfg.win.t_base_us;
  j["baseline_mode"] = baseline_mode_name(cfg.baseline_mode);
  j["common_baseline"] = cfg.common_baseline_mV;
  j["shots_ground"] = cfg.shots_ground;
  j["shots_excited"] = cfg.shots_excited;
  j["duration"] = cfg.duration_us;
  j["dt"] = cfg.dt_us;
  j["pre_pulse"] = cfg.pre_pulse_us;
  if (cfg.seed) j["seed"] = *cfg.seed; else j["seed"] = nullptr;
  j["threads"] = cfg.threads;
  j["grid_t_ro"] = format_double(cfg.grid_t_ro.lo) + ":" +
                   format_double(cfg.grid_t_ro.hi) + ":" +
                   std::to_string(cfg.grid_t_ro.count);
  j["grid_avg"] = format_double(cfg.grid_averaging.lo) + ":" +
                  format_double(cfg.grid_averaging.hi) + ":" +
                  std::to_string(cfg.grid_averaging.count);
  j["n_traces"] = cfg.n_traces;
  j["fit_method"] = cfg.fit_method;
  j["bin_width"] = cfg.bin_width_mV;
  if (cfg.decay_free_reference) j["decay_free_reference"] = *cfg.decay_free_reference;
  else j["decay_free_reference"] = nullptr;
  j["write_traces"] = cfg.write_traces;
  j["f_d"] = cfg.meta.f_d_GHz;
  j["p_d"] = cfg.meta.p_d_dBm;
  j["f_p"] = cfg.meta.f_p_MHz;
  j["p_p"] = cfg.meta.p_p_dBm;
  j["annotations"] = cfg.meta.annotations;
  return j;
}

OrderedJson provenance_json(const RunConfig& cfg,
                            std::optional<std::uint64_t> seed_used) {
  OrderedJson j;
  j["tool"] = kToolName;
  j["version"] = kVersion;
  j["timestamp"] = iso8601_utc_timestamp();
  if (seed_used) j["seed"] = *seed_used; else j["seed"] = nullptr;
  j["config_hash"] = format_hash(config_hash(cfg));
  return j;
}

std::string iso8601_utc_timestamp() {
  std::time_t t = 0;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) {
    // Reproducible-build hook: freeze the timestamp to the given epoch.
    std::uint64_t v = 0;
    const auto res = std::from_chars(env, env + std::strlen(env), v);
    if (res.ec == std::errc() && res.ptr == env + std::strlen(env))
      t = static_cast<std::time_t>(v);
  } else {
    t = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02dZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec);
  return buf;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text;
  if (!os) throw std::runtime_error("write failed: " + path.string());
}

void write_json_file(const std::filesystem::path& path, const OrderedJson& doc) {
  write_text_file(path, doc.dump(2) + "\n");
}

// ---- output staging ---------------------------------------------------------------------

OutputStager::OutputStager(std::filesystem::path dir) : dir_(std::move(dir)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + dir_.string() +
                                   ": " + ec.message());
}

OutputStager::~OutputStager() {
  // Anything not committed is a partial output from a failed run.
  for (const auto& [tmp, final_path] : pending_) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    (void)final_path;
  }
}

std::filesystem::path OutputStager::stage(const std::string& filename) {
  const std::filesystem::path final_path = dir_ / filename;
  const std::filesystem::path tmp = dir_ / (filename + ".tmp");
  pending_.emplace_back(tmp, final_path);
  return tmp;
}

void OutputStager::commit() {
  for (const auto& [tmp, final_path] : pending_) {
    std::filesystem::rename(tmp, final_path);
  }
  pending_.clear();
}

} // namespace bolo
