// bolosim: simulate single-shot bolometric readout data, fit the signal
// distributions, and evaluate discrimination fidelity and its improvement
// budget. See README.md for the file formats.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <functional>
#include <iostream>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "bolosim/densities.hpp"
#include "bolosim/fidelity.hpp"
#include "bolosim/fitting.hpp"
#include "bolosim/histogram.hpp"
#include "bolosim/io.hpp"
#include "bolosim/model.hpp"
#include "bolosim/quadrature.hpp"
#include "bolosim/rng.hpp"
#include "bolosim/signal_proc.hpp"
#include "bolosim/special.hpp"
#include "bolosim/trace_sim.hpp"
#include "bolosim/version.hpp"

namespace fs = std::filesystem;
using bolo::OrderedJson;

namespace {

// Flags shared by every subcommand. --seed on the command line overrides a
// seed in the config file.
struct CommonOpts {
  std::string config_path;
  std::string out_dir = ".";
  std::string format = "json";
  std::uint64_t seed_value = 0;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* config_opt = nullptr;
};

void add_common(CLI::App* sub, CommonOpts& c) {
  c.config_opt = sub->add_option("--config", c.config_path, "config file (key = value lines)")
                     ->check(CLI::ExistingFile);
  c.seed_opt = sub->add_option("--seed", c.seed_value, "master seed for all randomness");
  sub->add_option("--out", c.out_dir, "output directory (created if missing)");
  sub->add_option("--format", c.format, "emit additional flat CSV files with 'csv'")
      ->check(CLI::IsMember({"csv", "json"}));
}

bolo::RunConfig load_effective_config(const CommonOpts& c) {
  bolo::RunConfig cfg =
      c.config_path.empty() ? bolo::RunConfig{} : bolo::load_config(c.config_path);
  if (c.seed_opt != nullptr && c.seed_opt->count() > 0) cfg.seed = c.seed_value;
  cfg.validate();
  return cfg;
}

std::uint64_t require_seed(const bolo::RunConfig& cfg) {
  if (!cfg.seed)
    throw std::invalid_argument(
        "--seed is required for this command (or set seed in the config)");
  return *cfg.seed;
}

// Datasets are stamped with the hash of the generating configuration; when a
// config is supplied alongside such a dataset the two must agree.
void check_ingest_hash(const CommonOpts& c, const bolo::RunConfig& cfg,
                       std::optional<std::uint64_t> file_hash,
                       const std::string& what) {
  if (c.config_opt == nullptr || c.config_opt->count() == 0) return;
  if (!file_hash) return;
  const std::uint64_t want = bolo::config_hash(cfg);
  if (*file_hash != want)
    throw std::invalid_argument(
        what + " was generated under config " + bolo::format_hash(*file_hash) +
        " but --config hashes to " + bolo::format_hash(want));
}

OrderedJson threshold_json(const bolo::ThresholdResult& r) {
  OrderedJson j;
  j["v_th_mV"] = r.v_th_mV;
  j["fidelity"] = r.fidelity;
  j["p_g_given_e"] = r.p_g_given_e;
  j["p_e_given_g"] = r.p_e_given_g;
  j["reversed"] = r.reversed;
  return j;
}

OrderedJson decay_free_json(const bolo::DecayFreeFidelityReport& r) {
  OrderedJson j;
  j["via_model_t1_removed"] = r.via_model_t1_removed;
  j["via_gaussian_overlap"] = r.via_gaussian_overlap;
  if (r.reference) j["reference"] = *r.reference; else j["reference"] = nullptr;
  j["discrepancy"] = r.discrepancy;
  return j;
}

// Flat key,value CSV used by --format csv.
void write_kv_csv(const fs::path& path,
                  const std::vector<std::pair<std::string, std::string>>& rows) {
  std::string text = "key,value\n";
  for (const auto& [k, v] : rows) text += k + "," + v + "\n";
  bolo::write_text_file(path, text);
}

Eigen::ArrayXd signals_of(const std::vector<bolo::ShotRecord>& shots,
                          std::optional<bolo::PreparedState> state) {
  std::vector<double> vals;
  for (const auto& s : shots)
    if (!state || s.prepared_state == *state) vals.push_back(s.s_mV);
  return Eigen::Map<const Eigen::ArrayXd>(vals.data(),
                                          static_cast<Eigen::Index>(vals.size()));
}

OrderedJson sample_summary(const Eigen::ArrayXd& v) {
  OrderedJson j;
  j["n"] = v.size();
  if (v.size() >= 2) {
    const bolo::GaussianFit g = bolo::fit_single_gaussian(v);
    j["mean_mV"] = g.mean_mV;
    j["std_mV"] = g.sigma_mV;
  } else {
    j["mean_mV"] = nullptr;
    j["std_mV"] = nullptr;
  }
  return j;
}

std::string trace_filename(bolo::PreparedState state, std::uint64_t i) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s_%05llu.bolo",
                state == bolo::PreparedState::ground ? "ground" : "excited",
                static_cast<unsigned long long>(i));
  return buf;
}

// ---- simulate -----------------------------------------------------------------

void run_simulate(const CommonOpts& c) {
  const bolo::RunConfig cfg = load_effective_config(c);
  if (cfg.shots_ground + cfg.shots_excited == 0)
    throw std::invalid_argument("shots_ground + shots_excited must be at least 1");
  const std::uint64_t seed = require_seed(cfg);
  const bolo::SimulationSetup setup = cfg.to_setup();
  const std::uint64_t hash = bolo::config_hash(cfg);

  auto shots = bolo::simulate_shot_batch(cfg.shots_ground, bolo::PreparedState::ground,
                                         setup, cfg.baseline_mode, seed, cfg.threads, 0);
  auto excited = bolo::simulate_shot_batch(cfg.shots_excited,
                                           bolo::PreparedState::excited, setup,
                                           cfg.baseline_mode, seed, cfg.threads,
                                           cfg.shots_ground);
  shots.insert(shots.end(), excited.begin(), excited.end());

  bolo::OutputStager stage(c.out_dir);
  bolo::write_shots_csv(stage.stage("shots.csv"), shots, hash);

  OrderedJson outputs;
  outputs["shots_csv"] = "shots.csv";
  outputs["traces_manifest"] = nullptr;

  if (cfg.write_traces) {
    // Re-running the batches with the same seed reproduces the exact traces
    // behind the recorded shots (the per-shot streams are index-keyed).
    bolo::TraceSetManifest man;
    man.config_hash = hash;
    man.dt_us = cfg.dt_us;
    man.pre_pulse_us = cfg.pre_pulse_us;
    man.duration_us = setup.duration_us;
    man.baseline_mode = cfg.baseline_mode;
    man.common_baseline_mV = cfg.common_baseline_mV;
    man.t_base_us = cfg.win.t_base_us;
    const auto tg = bolo::simulate_trace_batch(cfg.shots_ground,
                                               bolo::PreparedState::ground, setup,
                                               seed, cfg.threads, 0);
    const auto te = bolo::simulate_trace_batch(cfg.shots_excited,
                                               bolo::PreparedState::excited, setup,
                                               seed, cfg.threads, cfg.shots_ground);
    for (std::size_t i = 0; i < tg.size(); ++i) {
      const std::string name = trace_filename(bolo::PreparedState::ground, i);
      bolo::write_trace_file(stage.stage(name), tg[i]);
      man.entries.push_back({name, bolo::PreparedState::ground, i});
    }
    for (std::size_t i = 0; i < te.size(); ++i) {
      const std::string name = trace_filename(bolo::PreparedState::excited, i);
      bolo::write_trace_file(stage.stage(name), te[i]);
      man.entries.push_back({name, bolo::PreparedState::excited, cfg.shots_ground + i});
    }
    bolo::write_traces_manifest(stage.stage("traces_manifest.json"), man);
    outputs["traces_manifest"] = "traces_manifest.json";
  }

  OrderedJson doc;
  doc["command"] = "simulate";
  doc["provenance"] = bolo::provenance_json(cfg, seed);
  doc["config"] = bolo::config_json(cfg);
  doc["outputs"] = outputs;
  OrderedJson summary;
  summary["ground"] = sample_summary(signals_of(shots, bolo::PreparedState::ground));
  summary["excited"] = sample_summary(signals_of(shots, bolo::PreparedState::excited));
  doc["summary"] = summary;
  bolo::write_json_file(stage.stage("simulate.json"), doc);
  stage.commit();

  std::cout << "wrote " << shots.size() << " shots to "
            << (fs::path(c.out_dir) / "shots.csv").string() << " (config "
            << bolo::format_hash(hash) << ")\n";
}

// ---- traces -------------------------------------------------------------------

void run_traces(const CommonOpts& c) {
  const bolo::RunConfig cfg = load_effective_config(c);
  if (cfg.n_traces == 0) throw std::invalid_argument("n_traces must be at least 1");
  const std::uint64_t seed = require_seed(cfg);
  const bolo::SimulationSetup setup = cfg.to_setup();
  const std::uint64_t hash = bolo::config_hash(cfg);

  bolo::OutputStager stage(c.out_dir);
  bolo::TraceSetManifest man;
  man.config_hash = hash;
  man.dt_us = cfg.dt_us;
  man.pre_pulse_us = cfg.pre_pulse_us;
  man.duration_us = setup.duration_us;
  man.baseline_mode = cfg.baseline_mode;
  man.common_baseline_mV = cfg.common_baseline_mV;
  man.t_base_us = cfg.win.t_base_us;

  const auto tg = bolo::simulate_trace_batch(cfg.n_traces, bolo::PreparedState::ground,
                                             setup, seed, cfg.threads, 0);
  const auto te = bolo::simulate_trace_batch(cfg.n_traces, bolo::PreparedState::excited,
                                             setup, seed, cfg.threads, cfg.n_traces);
  for (std::size_t i = 0; i < tg.size(); ++i) {
    const std::string name = trace_filename(bolo::PreparedState::ground, i);
    bolo::write_trace_file(stage.stage(name), tg[i]);
    man.entries.push_back({name, bolo::PreparedState::ground, i});
  }
  for (std::size_t i = 0; i < te.size(); ++i) {
    const std::string name = trace_filename(bolo::PreparedState::excited, i);
    bolo::write_trace_file(stage.stage(name), te[i]);
    man.entries.push_back({name, bolo::PreparedState::excited, cfg.n_traces + i});
  }
  bolo::write_traces_manifest(stage.stage("traces_manifest.json"), man);

  OrderedJson doc;
  doc["command"] = "traces";
  doc["provenance"] = bolo::provenance_json(cfg, seed);
  doc["config"] = bolo::config_json(cfg);
  OrderedJson outputs;
  outputs["traces_manifest"] = "traces_manifest.json";
  outputs["n_ground"] = tg.size();
  outputs["n_excited"] = te.size();
  outputs["samples_per_trace"] = tg.empty() ? 0 : tg.front().samples.size();
  doc["outputs"] = outputs;
  bolo::write_json_file(stage.stage("traces.json"), doc);
  stage.commit();

  std::cout << "wrote " << (tg.size() + te.size()) << " traces to " << c.out_dir
            << " (config " << bolo::format_hash(hash) << ")\n";
}

// ---- fit ----------------------------------------------------------------------

struct FitOpts {
  std::string input;
  std::string model;
  std::string state; // empty -> model default
};

void run_fit(const CommonOpts& c, const FitOpts& f) {
  const bolo::RunConfig cfg = load_effective_config(c);
  const bolo::ShotsFile sf = bolo::read_shots_csv(f.input);
  if (sf.shots.empty())
    throw std::invalid_argument(f.input + ": no data rows");
  check_ingest_hash(c, cfg, sf.config_hash, f.input);

  std::string state = f.state;
  if (state.empty()) state = (f.model == "decay") ? "excited" : "all";
  std::optional<bolo::PreparedState> sel;
  if (state == "ground") sel = bolo::PreparedState::ground;
  else if (state == "excited") sel = bolo::PreparedState::excited;
  else if (state != "all") throw std::invalid_argument("--state must be ground, excited, or all");

  const Eigen::ArrayXd samples = signals_of(sf.shots, sel);
  if (samples.size() < 2)
    throw std::invalid_argument(f.input + ": fewer than 2 '" + state + "' rows");
  const bolo::Histogram hist = bolo::build_histogram(samples, cfg.bin_width_mV);
  const bolo::FitMethod method = cfg.fit_method == "mle"
                                     ? bolo::FitMethod::max_likelihood
                                     : bolo::FitMethod::weighted_least_squares;

  OrderedJson fit_block;
  std::function<double(double)> model_density;

  if (f.model == "two_gauss") {
    const bolo::TwoGaussFitResult r =
        (method == bolo::FitMethod::weighted_least_squares)
            ? bolo::fit_two_gaussians(hist)
            : bolo::fit_two_gaussians(samples, method, cfg.bin_width_mV);
    OrderedJson comps = OrderedJson::array();
    for (const bolo::GaussianComponent* comp : {&r.params.lo, &r.params.hi}) {
      OrderedJson cj;
      cj["weight"] = comp->weight;
      cj["mean_mV"] = comp->mean_mV;
      cj["sigma_mV"] = comp->sigma_mV;
      comps.push_back(cj);
    }
    fit_block["components"] = comps;
    fit_block["residual_norm"] = r.residual_norm;
    fit_block["iterations"] = r.iterations;
    fit_block["converged"] = r.converged;
    fit_block["degenerate"] = r.degenerate;
    const bolo::GaussianMixtureParams p = r.params;
    model_density = [p](double v) {
      return p.lo.weight * bolo::normal_pdf(v, p.lo.mean_mV, p.lo.sigma_mV) +
             p.hi.weight * bolo::normal_pdf(v, p.hi.mean_mV, p.hi.sigma_mV);
    };
  } else if (f.model == "decay") {
    const bolo::DecayFitResult r =
        (method == bolo::FitMethod::weighted_least_squares)
            ? bolo::fit_decay_model(hist, cfg.win, cfg.resp.tau_b_us)
            : bolo::fit_decay_model(samples, cfg.win, cfg.resp.tau_b_us, method,
                                    cfg.bin_width_mV);
    OrderedJson params;
    params["c_g_mV"] = r.params.c_g_mV;
    params["c_e_mV"] = r.params.c_e_mV;
    params["t1_us"] = r.params.t1_us;
    params["sigma_mV"] = r.params.sigma_mV;
    params["p_x"] = r.params.p_x;
    fit_block["parameters"] = params;
    if (r.covariance.size() > 0) {
      OrderedJson cov = OrderedJson::array();
      for (Eigen::Index i = 0; i < r.covariance.rows(); ++i) {
        OrderedJson row = OrderedJson::array();
        for (Eigen::Index j = 0; j < r.covariance.cols(); ++j)
          row.push_back(r.covariance(i, j));
        cov.push_back(row);
      }
      fit_block["covariance"] = cov;
      fit_block["covariance_order"] = {"c_g", "c_e", "t1", "sigma", "p_x"};
    } else {
      fit_block["covariance"] = nullptr;
    }
    fit_block["residual_norm"] = r.residual_norm;
    fit_block["iterations"] = r.iterations;
    fit_block["converged"] = r.converged;
    fit_block["t1_unidentifiable"] = r.t1_unidentifiable;
    fit_block["quad_abs_tol"] = r.quad_abs_tol;
    fit_block["decay_free"] = decay_free_json(
        bolo::decay_free_fidelity(r.params, cfg.decay_free_reference));
    const bolo::DecayDistParams p = r.params;
    model_density = [p](double v) { return bolo::pdf_excited_total(v, p); };
  } else {
    throw std::invalid_argument("--model must be two_gauss or decay");
  }

  bolo::OutputStager stage(c.out_dir);
  // Plot data: per-bin probability density of the data next to the fitted
  // curve at the bin centers.
  {
    std::string text = "bin_center_mV,count,density_data,density_model\n";
    const double n = static_cast<double>(hist.total());
    const Eigen::ArrayXd centers = hist.centers();
    for (Eigen::Index i = 0; i < hist.n_bins(); ++i) {
      const double density = hist.counts[i] / (n * hist.bin_width(i));
      text += bolo::format_double(centers[i]) + "," + std::to_string(hist.counts[i]) +
              "," + bolo::format_double(density) + "," +
              bolo::format_double(model_density(centers[i])) + "\n";
    }
    bolo::write_text_file(stage.stage("fit_curve.csv"), text);
  }

  OrderedJson doc;
  doc["command"] = "fit";
  doc["provenance"] = bolo::provenance_json(cfg, cfg.seed);
  doc["config"] = bolo::config_json(cfg);
  OrderedJson input;
  input["path"] = f.input;
  input["config_hash"] =
      sf.config_hash ? OrderedJson(bolo::format_hash(*sf.config_hash)) : OrderedJson(nullptr);
  input["state"] = state;
  input["n_samples"] = samples.size();
  doc["input"] = input;
  doc["model"] = f.model;
  doc["method"] = cfg.fit_method;
  OrderedJson hj;
  hj["n_bins"] = hist.n_bins();
  hj["bin_width_mV"] = hist.bin_width(0);
  doc["histogram"] = hj;
  doc["fit"] = fit_block;
  bolo::write_json_file(stage.stage("fit.json"), doc);
  stage.commit();

  std::cout << "fit written to " << (fs::path(c.out_dir) / "fit.json").string() << "\n";
}

// ---- fidelity -------------------------------------------------------------------

struct FidelityOpts {
  std::string input;
};

void run_fidelity(const CommonOpts& c, const FidelityOpts& f) {
  const bolo::RunConfig cfg = load_effective_config(c);
  const bolo::ShotsFile sf = bolo::read_shots_csv(f.input);
  check_ingest_hash(c, cfg, sf.config_hash, f.input);

  const Eigen::ArrayXd g = signals_of(sf.shots, bolo::PreparedState::ground);
  const Eigen::ArrayXd e = signals_of(sf.shots, bolo::PreparedState::excited);
  if (g.size() == 0 || e.size() == 0)
    throw std::invalid_argument(f.input + ": need both ground and excited rows");

  const bolo::ThresholdResult emp = bolo::optimal_threshold(g, e);

  // Model-side numbers from the configured parameters.
  bolo::DecayDistParams params;
  params.c_g_mV = cfg.resp.c_g_mV;
  params.c_e_mV = cfg.resp.c_e_mV;
  params.t1_us = cfg.qubit.t1_us;
  params.sigma_mV = bolo::window_sigma(cfg.win, cfg.noise);
  params.p_x = cfg.qubit.p_x;
  params.win = cfg.win;
  params.tau_b_us = cfg.resp.tau_b_us;
  const bolo::ThresholdResult model = bolo::model_optimal_threshold(params);
  const double delta_u =
      std::abs(bolo::window_mean_excited(cfg.win, cfg.resp, cfg.win.t_ro_us) -
               bolo::window_mean_ground(cfg.win, cfg.resp));
  const double overlap_limit = bolo::gaussian_snr_fidelity(delta_u, params.sigma_mV);
  const bolo::DecayFreeFidelityReport decay_free =
      bolo::decay_free_fidelity(params, cfg.decay_free_reference);

  bolo::OutputStager stage(c.out_dir);
  OrderedJson doc;
  doc["command"] = "fidelity";
  doc["provenance"] = bolo::provenance_json(cfg, cfg.seed);
  doc["config"] = bolo::config_json(cfg);
  OrderedJson input;
  input["path"] = f.input;
  input["config_hash"] =
      sf.config_hash ? OrderedJson(bolo::format_hash(*sf.config_hash)) : OrderedJson(nullptr);
  input["n_ground"] = g.size();
  input["n_excited"] = e.size();
  doc["input"] = input;
  doc["empirical"] = threshold_json(emp);
  doc["model"] = threshold_json(model);
  doc["gaussian_overlap_limit"] = overlap_limit;
  doc["t1_error"] = bolo::t1_error(cfg.win.t_ro_us, cfg.qubit.t1_us);
  doc["decay_free"] = decay_free_json(decay_free);
  bolo::write_json_file(stage.stage("fidelity.json"), doc);

  if (c.format == "csv") {
    write_kv_csv(stage.stage("fidelity.csv"),
                 {{"fidelity", bolo::format_double(emp.fidelity)},
                  {"v_th_mV", bolo::format_double(emp.v_th_mV)},
                  {"p_g_given_e", bolo::format_double(emp.p_g_given_e)},
                  {"p_e_given_g", bolo::format_double(emp.p_e_given_g)},
                  {"reversed", emp.reversed ? "true" : "false"},
                  {"model_fidelity", bolo::format_double(model.fidelity)},
                  {"gaussian_overlap_limit", bolo::format_double(overlap_limit)},
                  {"t1_error", bolo::format_double(bolo::t1_error(cfg.win.t_ro_us,
                                                                  cfg.qubit.t1_us))}});
  }
  stage.commit();

  char line[160];
  std::snprintf(line, sizeof line,
                "fidelity %.4f at threshold %.3f mV (model %.4f); results in %s\n",
                emp.fidelity, emp.v_th_mV, model.fidelity,
                (fs::path(c.out_dir) / "fidelity.json").string().c_str());
  std::cout << line;
}

// ---- sweep ----------------------------------------------------------------------

struct SweepOpts {
  std::string traces_dir;
};

void run_sweep(const CommonOpts& c, const SweepOpts& s) {
  const bolo::RunConfig cfg = load_effective_config(c);
  const fs::path dir(s.traces_dir);
  const bolo::TraceSetManifest man =
      bolo::read_traces_manifest(dir / "traces_manifest.json");
  check_ingest_hash(c, cfg, man.config_hash, (dir / "traces_manifest.json").string());
  if (man.baseline_mode != bolo::BaselineMode::common)
    throw std::invalid_argument(
        "sweep requires common-baseline traces (per-shot baselines would "
        "re-subtract noise per cell)");

  std::vector<bolo::Trace> tg, te;
  for (const auto& entry : man.entries) {
    bolo::Trace t = bolo::trace_from_file_data(bolo::read_trace_file(dir / entry.file));
    (entry.state == bolo::PreparedState::ground ? tg : te).push_back(std::move(t));
  }
  if (tg.empty() || te.empty())
    throw std::invalid_argument("trace set needs both ground and excited traces");

  const Eigen::ArrayXd t_ro_axis = cfg.grid_t_ro.axis();
  const Eigen::ArrayXd avg_axis = cfg.grid_averaging.axis();

  // A cell is shaped correctly when the averaging time fits inside t_RO.
  bool any_feasible = false;
  for (Eigen::Index i = 0; i < t_ro_axis.size() && !any_feasible; ++i)
    for (Eigen::Index j = 0; j < avg_axis.size() && !any_feasible; ++j)
      if (avg_axis[j] > 0.0 && avg_axis[j] <= t_ro_axis[i]) any_feasible = true;

  bolo::OutputStager stage(c.out_dir);
  OrderedJson doc;
  doc["command"] = "sweep";
  doc["provenance"] = bolo::provenance_json(cfg, cfg.seed);
  doc["config"] = bolo::config_json(cfg);
  OrderedJson input;
  input["traces_dir"] = s.traces_dir;
  input["config_hash"] = bolo::format_hash(man.config_hash);
  input["n_ground"] = tg.size();
  input["n_excited"] = te.size();
  doc["input"] = input;
  OrderedJson warnings = OrderedJson::array();

  if (!any_feasible) {
    std::cerr << "warning: no feasible grid cells (averaging time exceeds t_RO "
                 "everywhere)\n";
    warnings.push_back("no feasible grid cells");
    OrderedJson lj;
    lj["t_ro_axis_us"] = std::vector<double>(t_ro_axis.data(),
                                             t_ro_axis.data() + t_ro_axis.size());
    lj["averaging_axis_us"] = std::vector<double>(avg_axis.data(),
                                                  avg_axis.data() + avg_axis.size());
    lj["fidelity"] = nullptr;
    lj["max"] = nullptr;
    lj["boundary_level"] = 0.6;
    lj["boundary"] = OrderedJson::array();
    doc["landscape"] = lj;
    doc["warnings"] = warnings;
    bolo::write_json_file(stage.stage("sweep.json"), doc);
    stage.commit();
    return;
  }

  const bolo::LandscapeGrid grid =
      bolo::fidelity_landscape(tg, te, t_ro_axis, avg_axis, man.common_baseline_mV,
                               cfg.threads, 0.6);

  Eigen::Index infeasible = 0;
  for (Eigen::Index i = 0; i < grid.fidelity.rows(); ++i)
    for (Eigen::Index j = 0; j < grid.fidelity.cols(); ++j)
      if (std::isnan(grid.fidelity(i, j))) ++infeasible;
  if (infeasible > 0) {
    char msg[96];
    std::snprintf(msg, sizeof msg, "%lld infeasible grid cells left absent",
                  static_cast<long long>(infeasible));
    std::cerr << "warning: " << msg << "\n";
    warnings.push_back(msg);
  }

  // Matrix CSV: rows are t_RO values, columns averaging times; absent cells
  // stay empty.
  {
    std::string text = "t_ro_us";
    for (Eigen::Index j = 0; j < avg_axis.size(); ++j)
      text += "," + bolo::format_double(avg_axis[j]);
    text += "\n";
    for (Eigen::Index i = 0; i < t_ro_axis.size(); ++i) {
      text += bolo::format_double(t_ro_axis[i]);
      for (Eigen::Index j = 0; j < avg_axis.size(); ++j) {
        text += ",";
        if (!std::isnan(grid.fidelity(i, j)))
          text += bolo::format_double(grid.fidelity(i, j));
      }
      text += "\n";
    }
    bolo::write_text_file(stage.stage("landscape.csv"), text);
  }
  if (c.format == "csv") {
    std::string text = "polyline,t_ro_us,averaging_us\n";
    for (std::size_t k = 0; k < grid.boundary.size(); ++k)
      for (Eigen::Index r = 0; r < grid.boundary[k].rows(); ++r)
        text += std::to_string(k) + "," + bolo::format_double(grid.boundary[k](r, 0)) +
                "," + bolo::format_double(grid.boundary[k](r, 1)) + "\n";
    bolo::write_text_file(stage.stage("contour.csv"), text);
  }

  OrderedJson lj;
  lj["t_ro_axis_us"] = std::vector<double>(t_ro_axis.data(),
                                           t_ro_axis.data() + t_ro_axis.size());
  lj["averaging_axis_us"] = std::vector<double>(avg_axis.data(),
                                                avg_axis.data() + avg_axis.size());
  OrderedJson fmat = OrderedJson::array();
  for (Eigen::Index i = 0; i < grid.fidelity.rows(); ++i) {
    OrderedJson row = OrderedJson::array();
    for (Eigen::Index j = 0; j < grid.fidelity.cols(); ++j) {
      if (std::isnan(grid.fidelity(i, j))) row.push_back(nullptr);
      else row.push_back(grid.fidelity(i, j));
    }
    fmat.push_back(row);
  }
  lj["fidelity"] = fmat;
  OrderedJson mx;
  mx["t_ro_us"] = grid.t_ro_axis_us[grid.max_i];
  mx["averaging_us"] = grid.averaging_axis_us[grid.max_j];
  mx["fidelity"] = grid.f_max;
  mx["v_th_mV"] = grid.v_th_mV(grid.max_i, grid.max_j);
  lj["max"] = mx;
  lj["boundary_level"] = grid.boundary_level;
  OrderedJson boundary = OrderedJson::array();
  for (const auto& poly : grid.boundary) {
    OrderedJson pj = OrderedJson::array();
    for (Eigen::Index r = 0; r < poly.rows(); ++r)
      pj.push_back({poly(r, 0), poly(r, 1)});
    boundary.push_back(pj);
  }
  lj["boundary"] = boundary;
  doc["landscape"] = lj;
  doc["warnings"] = warnings;
  bolo::write_json_file(stage.stage("sweep.json"), doc);
  stage.commit();

  char line[160];
  std::snprintf(line, sizeof line,
                "F_max = %.4f at t_RO = %.3f us, averaging = %.3f us\n", grid.f_max,
                grid.t_ro_axis_us[grid.max_i], grid.averaging_axis_us[grid.max_j]);
  std::cout << line;
}

// ---- budget ----------------------------------------------------------------------

struct BudgetOpts {
  bolo::BudgetFactors factors{2.0, 1.25, 1.5, 2.0, 2.0, 0.07, 0.001, 70.0, 13.0};
};

void run_budget(const CommonOpts& c, const BudgetOpts& b) {
  const bolo::RunConfig cfg = load_effective_config(c);
  const bolo::BudgetReport rep = bolo::improvement_budget(b.factors);

  bolo::OutputStager stage(c.out_dir);
  OrderedJson doc;
  doc["command"] = "budget";
  doc["provenance"] = bolo::provenance_json(cfg, cfg.seed);
  OrderedJson factors;
  factors["A_t"] = b.factors.a_t;
  factors["A_c"] = b.factors.a_c;
  factors["A_chi"] = b.factors.a_chi;
  factors["A_a"] = b.factors.a_a;
  factors["A_2f"] = b.factors.a_2f;
  factors["baseline_overlap_infidelity"] = b.factors.baseline_overlap_infidelity;
  factors["target_infidelity"] = b.factors.target_infidelity;
  factors["pulse_shortening_ratio"] = b.factors.pulse_shortening_ratio;
  factors["detector_resolution_gain"] = b.factors.detector_resolution_gain;
  doc["factors"] = factors;
  doc["required"] = rep.required;
  doc["available"] = rep.available;
  doc["margin"] = rep.margin;
  doc["pass"] = rep.pass;
  bolo::write_json_file(stage.stage("budget.json"), doc);
  if (c.format == "csv") {
    write_kv_csv(stage.stage("budget.csv"),
                 {{"required", bolo::format_double(rep.required)},
                  {"available", bolo::format_double(rep.available)},
                  {"margin", bolo::format_double(rep.margin)},
                  {"pass", rep.pass ? "true" : "false"}});
  }
  stage.commit();

  char line[200];
  std::snprintf(line, sizeof line,
                "required SNR improvement: %.3f\navailable: %.3f\nmargin: %.3fx (%s)\n",
                rep.required, rep.available, rep.margin, rep.pass ? "PASS" : "FAIL");
  std::cout << line;
}

// ---- demod-demo ---------------------------------------------------------------------

struct DemodOpts {
  double f_if_MHz = 70.3125;
  double rate_MSps = 250.0;
  double amplitude_mV = 1.0;
  double phase_deg = 0.0;
  double duration_us = 2.0;
  int boxcar = 1;
  double noise_sigma_mV = 0.0;
  std::string input;
};

void run_demod(const CommonOpts& c, const DemodOpts& d) {
  const bolo::RunConfig cfg = load_effective_config(c);

  Eigen::ArrayXd samples;
  double rate = d.rate_MSps;
  if (!d.input.empty()) {
    const bolo::Trace t = bolo::trace_from_file_data(bolo::read_trace_file(d.input));
    samples = t.samples;
    rate = 1.0 / t.dt_us;
  } else {
    samples = bolo::synthesize_tone(d.amplitude_mV, d.f_if_MHz, rate, d.duration_us,
                                    d.phase_deg * std::numbers::pi / 180.0);
  }
  if (d.noise_sigma_mV > 0.0) {
    bolo::ShotRng rng({require_seed(cfg), 0});
    for (Eigen::Index i = 0; i < samples.size(); ++i)
      samples[i] += d.noise_sigma_mV * rng.normal();
  }

  bolo::IqTrace iq = bolo::digital_demodulate(samples, d.f_if_MHz, rate);
  const int settle_raw = static_cast<int>(std::lround(rate / d.f_if_MHz));
  if (d.boxcar > 1) iq = bolo::boxcar_downsample(iq, d.boxcar);

  // Recover the tone from the settled region: a pure tone demodulates to
  // (A/2 cos phi, A/2 sin phi).
  const Eigen::Index settle =
      std::min<Eigen::Index>(iq.samples.rows() - 1,
                             settle_raw / std::max(1, d.boxcar) + 1);
  const Eigen::Index n_settled = iq.samples.rows() - settle;
  const double i_mean = iq.samples.col(0).tail(n_settled).mean();
  const double q_mean = iq.samples.col(1).tail(n_settled).mean();
  const double amp = 2.0 * std::hypot(i_mean, q_mean);
  const double phase = std::atan2(q_mean, i_mean);

  bolo::OutputStager stage(c.out_dir);
  {
    std::string text = "t_us,I_mV,Q_mV\n";
    for (Eigen::Index i = 0; i < iq.samples.rows(); ++i) {
      const double t = (static_cast<double>(i) + 0.5) * iq.dt_us;
      text += bolo::format_double(t) + "," + bolo::format_double(iq.samples(i, 0)) +
              "," + bolo::format_double(iq.samples(i, 1)) + "\n";
    }
    bolo::write_text_file(stage.stage("iq.csv"), text);
  }
  bolo::write_trace_file(stage.stage("demod_iq.bolo"), iq, 0.0);

  OrderedJson doc;
  doc["command"] = "demod-demo";
  doc["provenance"] = bolo::provenance_json(cfg, cfg.seed);
  OrderedJson tone;
  tone["f_if_MHz"] = d.f_if_MHz;
  tone["sample_rate_MSps"] = rate;
  tone["amplitude_mV"] = d.input.empty() ? OrderedJson(d.amplitude_mV) : OrderedJson(nullptr);
  tone["phase_deg"] = d.input.empty() ? OrderedJson(d.phase_deg) : OrderedJson(nullptr);
  tone["input"] = d.input.empty() ? OrderedJson(nullptr) : OrderedJson(d.input);
  tone["noise_sigma_mV"] = d.noise_sigma_mV;
  doc["tone"] = tone;
  doc["boxcar"] = d.boxcar;
  OrderedJson rec;
  rec["amplitude_mV"] = amp;
  rec["phase_rad"] = phase;
  rec["n_iq_samples"] = iq.samples.rows();
  doc["recovered"] = rec;
  bolo::write_json_file(stage.stage("demod.json"), doc);
  stage.commit();

  char line[120];
  std::snprintf(line, sizeof line, "recovered amplitude %.6f mV, phase %.6f rad\n",
                amp, phase);
  std::cout << line;
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"bolometric single-shot readout simulator and analysis toolkit"};
  app.set_version_flag("--version", bolo::kVersion);
  app.require_subcommand(1);

  CommonOpts sim_c, traces_c, fit_c, fid_c, sweep_c, budget_c, demod_c;
  FitOpts fit_o;
  FidelityOpts fid_o;
  SweepOpts sweep_o;
  BudgetOpts budget_o;
  DemodOpts demod_o;

  CLI::App* sim = app.add_subcommand("simulate", "simulate single-shot signals to shots.csv");
  add_common(sim, sim_c);
  sim->callback([&] { run_simulate(sim_c); });

  CLI::App* traces = app.add_subcommand("traces", "simulate full traces for landscape sweeps");
  add_common(traces, traces_c);
  traces->callback([&] { run_traces(traces_c); });

  CLI::App* fit = app.add_subcommand("fit", "fit a signal distribution from shots.csv");
  add_common(fit, fit_c);
  fit->add_option("--input", fit_o.input, "shots CSV file")->required()
      ->check(CLI::ExistingFile);
  fit->add_option("--model", fit_o.model, "two_gauss or decay")->required();
  fit->add_option("--state", fit_o.state, "ground, excited, or all");
  fit->callback([&] { run_fit(fit_c, fit_o); });

  CLI::App* fid = app.add_subcommand("fidelity", "threshold optimization and fidelity report");
  add_common(fid, fid_c);
  fid->add_option("--input", fid_o.input, "shots CSV file")->required()
      ->check(CLI::ExistingFile);
  fid->callback([&] { run_fidelity(fid_c, fid_o); });

  CLI::App* sweep = app.add_subcommand("sweep", "fidelity landscape over (t_RO, averaging)");
  add_common(sweep, sweep_c);
  sweep->add_option("--traces", sweep_o.traces_dir, "directory with traces_manifest.json")
      ->required()->check(CLI::ExistingDirectory);
  sweep->callback([&] { run_sweep(sweep_c, sweep_o); });

  CLI::App* budget = app.add_subcommand("budget", "SNR improvement budget");
  add_common(budget, budget_c);
  budget->add_option("--A_t", budget_o.factors.a_t, "drive retuning factor")
      ->check(CLI::PositiveNumber);
  budget->add_option("--A_c", budget_o.factors.a_c, "coupling factor")
      ->check(CLI::PositiveNumber);
  budget->add_option("--A_chi", budget_o.factors.a_chi, "dispersive-shift factor")
      ->check(CLI::PositiveNumber);
  budget->add_option("--A_a", budget_o.factors.a_a, "absorber factor")
      ->check(CLI::PositiveNumber);
  budget->add_option("--A_2f", budget_o.factors.a_2f, "two-photon factor")
      ->check(CLI::PositiveNumber);
  budget->add_option("--baseline", budget_o.factors.baseline_overlap_infidelity,
                     "baseline Gaussian-overlap infidelity");
  budget->add_option("--target", budget_o.factors.target_infidelity,
                     "target infidelity");
  budget->add_option("--ratio", budget_o.factors.pulse_shortening_ratio,
                     "pulse shortening ratio")->check(CLI::PositiveNumber);
  budget->add_option("--gain", budget_o.factors.detector_resolution_gain,
                     "detector resolution gain")->check(CLI::PositiveNumber);
  budget->callback([&] { run_budget(budget_c, budget_o); });

  CLI::App* demod = app.add_subcommand("demod-demo", "heterodyne IQ demodulation demo");
  add_common(demod, demod_c);
  demod->add_option("--f-if", demod_o.f_if_MHz, "intermediate frequency, MHz")
      ->check(CLI::PositiveNumber);
  demod->add_option("--rate", demod_o.rate_MSps, "sample rate, MS/s")
      ->check(CLI::PositiveNumber);
  demod->add_option("--amplitude", demod_o.amplitude_mV, "tone amplitude, mV");
  demod->add_option("--phase-deg", demod_o.phase_deg, "tone phase, degrees");
  demod->add_option("--duration", demod_o.duration_us, "tone duration, us")
      ->check(CLI::PositiveNumber);
  demod->add_option("--boxcar", demod_o.boxcar, "extra decimation factor")
      ->check(CLI::PositiveNumber);
  demod->add_option("--noise-sigma", demod_o.noise_sigma_mV, "additive noise std, mV")
      ->check(CLI::NonNegativeNumber);
  demod->add_option("--input", demod_o.input, "1-channel .bolo file instead of a tone")
      ->check(CLI::ExistingFile);
  demod->callback([&] { run_demod(demod_c, demod_o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2; // usage errors are exit 2; --help/--version exit 0
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
